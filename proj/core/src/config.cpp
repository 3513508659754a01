#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include "gazeauth/error.hpp"
#include "gazeauth/harness.hpp"

namespace gazeauth {

namespace {

using Scalar = std::variant<bool, long long, double, std::string>;

struct Value {
  std::vector<Scalar> items;
  bool is_array = false;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

class Parser {
 public:
  Parser(std::string origin, std::size_t line) : origin_(std::move(origin)), line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(origin_ + ":" + std::to_string(line_) + ": " + what);
  }

  Scalar scalar(std::string_view s) const {
    s = trim(s);
    if (s.empty()) fail("missing value");
    if (s.front() == '"') {
      if (s.size() < 2 || s.back() != '"') fail("unterminated string");
      const auto body = s.substr(1, s.size() - 2);
      if (body.find_first_of("\"\\") != std::string_view::npos) fail("escapes are not supported in strings");
      return std::string(body);
    }
    if (s == "true") return true;
    if (s == "false") return false;
    std::string digits;
    for (char c : s) {
      if (c != '_') digits.push_back(c);
    }
    long long i = 0;
    auto [pi, ei] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
    if (ei == std::errc() && pi == digits.data() + digits.size()) return i;
    double d = 0.0;
    auto [pd, ed] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (ed == std::errc() && pd == digits.data() + digits.size()) return d;
    fail("cannot parse value '" + std::string(s) + "'");
  }

  Value value(std::string_view s) const {
    s = trim(s);
    Value v;
    if (!s.empty() && s.front() == '[') {
      if (s.back() != ']') fail("unterminated array");
      v.is_array = true;
      std::string_view body = trim(s.substr(1, s.size() - 2));
      while (!body.empty()) {
        std::size_t end = 0;
        if (body.front() == '"') {
          end = body.find('"', 1);
          if (end == std::string_view::npos) fail("unterminated string");
          end = body.find(',', end);
        } else {
          end = body.find(',');
        }
        const auto item = body.substr(0, end);
        if (!trim(item).empty()) v.items.push_back(scalar(item));
        if (end == std::string_view::npos) break;
        body = trim(body.substr(end + 1));
      }
    } else {
      v.items.push_back(scalar(s));
    }
    return v;
  }

 private:
  std::string origin_;
  std::size_t line_;
};

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

class Binder {
 public:
  Binder(const Parser& p, const std::string& key, const Value& v) : p_(p), key_(key), v_(v) {}

  const Scalar& single() const {
    if (v_.is_array || v_.items.size() != 1) p_.fail("'" + key_ + "' expects a single value");
    return v_.items.front();
  }
  double real() const {
    const Scalar& s = single();
    if (auto d = std::get_if<double>(&s)) return *d;
    if (auto i = std::get_if<long long>(&s)) return static_cast<double>(*i);
    p_.fail("'" + key_ + "' expects a number");
  }
  long long integer() const {
    if (auto i = std::get_if<long long>(&single())) return *i;
    p_.fail("'" + key_ + "' expects an integer");
  }
  int int32() const {
    const long long i = integer();
    if (i < -2147483647LL || i > 2147483647LL) p_.fail("'" + key_ + "' is out of range");
    return static_cast<int>(i);
  }
  std::uint64_t seed() const {
    const long long i = integer();
    if (i < 0) p_.fail("'" + key_ + "' must be non-negative");
    return static_cast<std::uint64_t>(i);
  }
  bool boolean() const {
    if (auto b = std::get_if<bool>(&single())) return *b;
    p_.fail("'" + key_ + "' expects true or false");
  }
  std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (const auto& s : v_.items) {
      if (auto str = std::get_if<std::string>(&s)) {
        out.push_back(*str);
      } else {
        p_.fail("'" + key_ + "' expects strings");
      }
    }
    if (out.empty()) p_.fail("'" + key_ + "' must not be empty");
    return out;
  }
  template <typename T, typename F>
  std::vector<T> parsed(F parse) const {
    std::vector<T> out;
    for (const auto& s : strings()) {
      try {
        out.push_back(parse(s));
      } catch (const ValidationError& e) {
        p_.fail(e.what());
      }
    }
    return out;
  }

 private:
  const Parser& p_;
  const std::string& key_;
  const Value& v_;
};

bool parse_filter(std::string_view s) {
  if (s == "On") return true;
  if (s == "Off") return false;
  throw ValidationError("unknown filter setting '" + std::string(s) + "'");
}

void apply_key(ConfigFile& cfg, const std::string& section, const std::string& key, const Binder& b, const Parser& p) {
  auto& h = cfg.harness;
  if (section.empty() && key == "seed") {
    cfg.seed = b.seed();
  } else if (section == "synth") {
    auto& s = h.synth;
    if (key == "n_train_subjects") s.n_train_subjects = b.int32();
    else if (key == "n_test_subjects") s.n_test_subjects = b.int32();
    else if (key == "task_recordings_per_subject") s.task_recordings_per_subject = b.int32();
    else if (key == "task_duration_s") s.task_duration_s = b.real();
    else if (key == "dwell_s") s.dwell_s = b.real();
    else if (key == "fov_half_deg") s.fov_half_deg = b.real();
    else if (key == "ipd_mm") s.ipd_mm = b.real();
    else if (key == "blink_fraction") s.blink_fraction = b.real();
    else if (key == "folds") s.folds = b.int32();
    else if (key == "seed") cfg.seed = b.seed();
    else p.fail("unknown key '" + key + "' in [synth]");
  } else if (section == "train") {
    if (key == "epoch_scale") h.scale.epoch_scale = b.real();
    else if (key == "users_per_batch") h.scale.users_per_batch = b.int32();
    else if (key == "samples_per_user") h.scale.samples_per_user = b.int32();
    else if (key == "full_scale") h.scale.full_scale = b.boolean();
    else if (key == "growth") h.embedder.growth = b.int32();
    else if (key == "kernel_size") h.embedder.kernel_size = b.int32();
    else if (key == "far_target") h.far_target = b.real();
    else if (key == "ms_alpha") h.ms_loss.alpha = b.real();
    else if (key == "ms_beta") h.ms_loss.beta = b.real();
    else if (key == "ms_lambda") h.ms_loss.lambda = b.real();
    else if (key == "ms_epsilon") h.ms_loss.epsilon = b.real();
    else p.fail("unknown key '" + key + "' in [train]");
  } else if (section == "grid") {
    auto& g = cfg.grid;
    if (key == "scenarios") g.scenarios = b.parsed<Scenario>(parse_scenario);
    else if (key == "calib_training") g.calib_training = b.parsed<CalibTraining>(parse_calib_training);
    else if (key == "pipelines") g.pipelines = b.parsed<Pipeline>(parse_pipeline);
    else if (key == "axes") g.axes = b.parsed<Axis>(parse_axis);
    else if (key == "regimes") g.regimes = b.parsed<Regime>(parse_regime);
    else if (key == "filters") g.filters = b.parsed<bool>(parse_filter);
    else if (key == "experimental_s3") h.experimental_s3 = b.boolean();
    else p.fail("unknown key '" + key + "' in [grid]");
  } else {
    p.fail("unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
  }
}

}  // namespace

ConfigFile parse_config(std::string_view text, const std::string& origin) {
  ConfigFile cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const Parser p(origin, line_no);
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') p.fail("malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "synth" && section != "train" && section != "grid") p.fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) p.fail("expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) p.fail("missing key");
    const Value v = p.value(line.substr(eq + 1));
    apply_key(cfg, section, key, Binder(p, key, v), p);
  }
  return cfg;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace gazeauth
