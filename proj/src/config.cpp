#include "cyclehash/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cyclehash/errors.hpp"

namespace cyclehash {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "an unsigned integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  // from_chars for double is not available in every libstdc++ we target.
  std::istringstream is(value);
  is.imbue(std::locale::classic());
  double out = 0;
  is >> out;
  if (value.empty() || !is || !is.eof() || !std::isfinite(out)) {
    bad_value(key, value, "a finite number");
  }
  return out;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (value == "none") return out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(parse_u64(key, trim(part)));
  if (out.empty()) bad_value(key, value, "a comma-separated list (or 'none')");
  return out;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_list(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Member>
Field size_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::size_t>(parse_u64(k, v));
          },
          [member](const RunConfig& c) {
            return std::to_string(member(c));
          }};
}

template <class Member>
Field double_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_double(k, v);
          },
          [member](const RunConfig& c) {
            return format_double(member(c));
          }};
}

template <class Member>
Field list_field(Member member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            member(c) = parse_list(k, v);
          },
          [member](const RunConfig& c) {
            return format_list(member(c));
          }};
}

using Schema = std::vector<std::pair<std::string, Field>>;

const Schema& schema() {
  static const Schema s = [] {
    Schema out;
    auto add = [&](const char* key, Field f) { out.emplace_back(key, std::move(f)); };
    add("n_classes", size_field([](auto& c) -> auto& { return c.synth.n_classes; }));
    add("samples_per_class",
        size_field([](auto& c) -> auto& { return c.synth.samples_per_class; }));
    add("latent_dim", size_field([](auto& c) -> auto& { return c.synth.latent_dim; }));
    add("d_u", size_field([](auto& c) -> auto& { return c.synth.dim_u; }));
    add("d_v", size_field([](auto& c) -> auto& { return c.synth.dim_v; }));
    add("noise", double_field([](auto& c) -> auto& { return c.synth.noise; }));
    add("separation", double_field([](auto& c) -> auto& { return c.synth.separation; }));
    add("seed", {[](RunConfig& c, const std::string& k, const std::string& v) {
                   c.train.seed = parse_u64(k, v);
                   c.synth.seed = c.train.seed;
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    add("bits", size_field([](auto& c) -> auto& { return c.train.arch.bits; }));
    add("epochs_flat", size_field([](auto& c) -> auto& { return c.train.epochs_flat; }));
    add("epochs_decay",
        size_field([](auto& c) -> auto& { return c.train.epochs_decay; }));
    add("base_lr", double_field([](auto& c) -> auto& { return c.train.base_lr; }));
    add("batch_size", size_field([](auto& c) -> auto& { return c.train.batch_size; }));
    add("lambda", double_field([](auto& c) -> auto& { return c.train.lambda; }));
    add("sgh_weight", double_field([](auto& c) -> auto& { return c.train.sgh_weight; }));
    add("n_samples", size_field([](auto& c) -> auto& { return c.train.n_samples; }));
    add("history_capacity",
        size_field([](auto& c) -> auto& { return c.train.history_capacity; }));
    add("d_steps", size_field([](auto& c) -> auto& { return c.train.d_steps; }));
    add("clip_norm", double_field([](auto& c) -> auto& { return c.train.clip_norm; }));
    add("checkpoint_every",
        size_field([](auto& c) -> auto& { return c.train.checkpoint_every; }));
    add("adam_beta1", double_field([](auto& c) -> auto& { return c.train.adam.beta1; }));
    add("adam_beta2", double_field([](auto& c) -> auto& { return c.train.adam.beta2; }));
    add("adam_eps", double_field([](auto& c) -> auto& { return c.train.adam.epsilon; }));
    add("disc_hidden",
        list_field([](auto& c) -> auto& { return c.train.arch.disc_hidden; }));
    add("stem_u", list_field([](auto& c) -> auto& { return c.train.arch.stem_u; }));
    add("stem_v", list_field([](auto& c) -> auto& { return c.train.arch.stem_v; }));
    add("database_fraction",
        double_field([](auto& c) -> auto& { return c.database_fraction; }));
    add("map_cutoff", size_field([](auto& c) -> auto& { return c.map_cutoff; }));
    return out;
  }();
  return s;
}

const Field* lookup(const std::string& key) {
  for (const auto& [k, f] : schema()) {
    if (k == key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  try {
    synth.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  train.validate();
  if (!(database_fraction > 0 && database_fraction < 1)) {
    throw ConfigError("database_fraction must lie strictly between 0 and 1");
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : schema()) out.push_back(k);
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Field* f = lookup(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(cfg, key, value);
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, f] : schema()) out.emplace_back(k, f.get(cfg));
  return out;
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace cyclehash
