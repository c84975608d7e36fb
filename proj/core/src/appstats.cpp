#include "netoffload/appstats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "netoffload/error.hpp"

namespace netoffload {

std::uint64_t AppRecord::total_classes() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : packages) n += c;
  return n;
}

namespace {

std::vector<std::string_view> segments(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    out.push_back(path.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

bool well_formed(std::string_view path) {
  if (path.empty()) return false;
  for (const auto s : segments(path))
    if (s.empty()) return false;
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError(fmt::format("line {}: invalid {} '{}'", line, what, text));
  return value;
}

}  // namespace

void Corpus::validate() const {
  std::set<std::string, std::less<>> ids;
  for (const auto& app : apps) {
    if (app.app_id.empty()) throw ValidationError("app id must not be empty");
    if (!ids.insert(app.app_id).second) throw ValidationError(fmt::format("duplicate app id '{}'", app.app_id));
    if (!(app.dex_size_bytes >= 0.0)) throw ValidationError(fmt::format("app '{}': dex size must be >= 0", app.app_id));
    for (const auto& [path, _] : app.packages)
      if (!well_formed(path)) throw ValidationError(fmt::format("app '{}': malformed package '{}'", app.app_id, path));
  }
}

Corpus parse_corpus(std::string_view text) {
  Corpus corpus;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw ValidationError(fmt::format("line {}: expected three tab-separated fields", line_no));
    AppRecord app;
    app.app_id = std::string(trim(line.substr(0, t1)));
    app.dex_size_bytes = parse_number<double>(trim(line.substr(t1 + 1, t2 - t1 - 1)), line_no, "dex size");
    auto rest = line.substr(t2 + 1);
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const auto item = trim(rest.substr(0, semi));
      rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
      if (item.empty()) continue;
      const auto eq = item.rfind('=');
      if (eq == std::string_view::npos) throw ValidationError(fmt::format("line {}: expected package=count", line_no));
      const auto path = trim(item.substr(0, eq));
      if (!well_formed(path)) throw ValidationError(fmt::format("line {}: malformed package '{}'", line_no, path));
      app.packages[std::string(path)] +=
          parse_number<std::uint64_t>(trim(item.substr(eq + 1)), line_no, "class count");
    }
    corpus.apps.push_back(std::move(app));
  }
  corpus.validate();
  return corpus;
}

Corpus load_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

std::string corpus_to_text(const Corpus& corpus) {
  std::string out;
  for (const auto& app : corpus.apps) {
    out += fmt::format("{}\t{}\t", app.app_id, app.dex_size_bytes);
    bool first = true;
    for (const auto& [path, count] : app.packages) {
      out += fmt::format("{}{}={}", first ? "" : ";", path, count);
      first = false;
    }
    out += '\n';
  }
  return out;
}

bool is_obfuscated_package(std::string_view path, const ObfuscationFilter& filter) {
  if (path.empty()) throw ValidationError("package path must not be empty");
  for (const auto s : segments(path)) {
    if (s.size() != 1) continue;
    if (!filter.a_to_p_only || (s[0] >= 'a' && s[0] <= 'p')) return true;
  }
  return false;
}

std::string package_prefix(std::string_view path, int depth) {
  const auto segs = segments(path);
  if (depth < 1 || segs.size() < static_cast<std::size_t>(depth)) return {};
  std::string out(segs[0]);
  for (int i = 1; i < depth; ++i) {
    out += '.';
    out += segs[static_cast<std::size_t>(i)];
  }
  return out;
}

namespace {

// prefix -> (app index -> classes under that prefix)
using Groups = std::map<std::string, std::map<std::size_t, std::uint64_t>>;

Groups shareable_groups(const Corpus& corpus, int depth, const ObfuscationFilter& filter) {
  Groups groups;
  for (std::size_t a = 0; a < corpus.apps.size(); ++a)
    for (const auto& [path, count] : corpus.apps[a].packages) {
      if (is_obfuscated_package(path, filter)) continue;
      auto prefix = package_prefix(path, depth);
      if (prefix.empty()) continue;
      groups[std::move(prefix)][a] += count;
    }
  return groups;
}

void check_request(const Corpus& corpus, int depth) {
  if (corpus.apps.empty()) throw ValidationError("corpus is empty");
  if (depth < 1) throw ValidationError(fmt::format("depth must be >= 1, got {}", depth));
}

}  // namespace

OverlapReport unique_class_fraction(const Corpus& corpus, int depth, const ObfuscationFilter& filter) {
  check_request(corpus, depth);
  std::vector<std::uint64_t> shared(corpus.apps.size(), 0);
  for (const auto& [_, members] : shareable_groups(corpus, depth, filter))
    if (members.size() >= 2)
      for (const auto& [a, count] : members) shared[a] += count;

  OverlapReport report;
  report.depth = depth;
  std::vector<double> values;
  for (std::size_t a = 0; a < corpus.apps.size(); ++a) {
    const auto total = corpus.apps[a].total_classes();
    const double pct =
        total == 0 ? 100.0 : 100.0 * static_cast<double>(total - shared[a]) / static_cast<double>(total);
    report.per_app_unique_fraction[corpus.apps[a].app_id] = pct;
    values.push_back(pct);
  }
  double sum = 0.0;
  for (const double v : values) sum += v;
  report.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  report.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return report;
}

double storage_savings(const Corpus& corpus, int depth, const ObfuscationFilter& filter) {
  check_request(corpus, depth);
  std::vector<double> per_class(corpus.apps.size());
  double naive = 0.0;
  for (std::size_t a = 0; a < corpus.apps.size(); ++a) {
    const auto& app = corpus.apps[a];
    const auto total = app.total_classes();
    if (total == 0) throw ValidationError(fmt::format("app '{}' has no classes", app.app_id));
    per_class[a] = app.dex_size_bytes / static_cast<double>(total);
    naive += app.dex_size_bytes;
  }
  if (!(naive > 0.0)) throw ValidationError("corpus has no dex bytes");

  double shared_naive = 0.0;
  double shared_dedup = 0.0;
  for (const auto& [_, members] : shareable_groups(corpus, depth, filter)) {
    if (members.size() < 2) continue;
    double largest = 0.0;
    for (const auto& [a, count] : members) {
      const double bytes = static_cast<double>(count) * per_class[a];
      shared_naive += bytes;
      largest = std::max(largest, bytes);
    }
    shared_dedup += largest;
  }
  const double dedup = naive - shared_naive + shared_dedup;
  return std::clamp(1.0 - dedup / naive, 0.0, 1.0);
}

OverlapReport overlap_report(const Corpus& corpus, int depth, const ObfuscationFilter& filter) {
  auto report = unique_class_fraction(corpus, depth, filter);
  report.storage_savings_fraction = storage_savings(corpus, depth, filter);
  return report;
}

nlohmann::json report_to_json(const OverlapReport& report) {
  return {{"depth", report.depth},
          {"mean_unique_percent", report.mean},
          {"median_unique_percent", report.median},
          {"storage_savings_fraction", report.storage_savings_fraction},
          {"per_app_unique_percent", report.per_app_unique_fraction}};
}

SynthCorpus synth_corpus(const SynthParams& params, std::uint64_t seed) {
  if (params.n_apps < 0) throw ValidationError("n_apps must be >= 0");
  if (params.private_packages < 1) throw ValidationError("private_packages must be >= 1");
  if (params.min_private_classes < 1 || params.max_private_classes < params.min_private_classes)
    throw ValidationError("private class range must satisfy 1 <= min <= max");
  if (!(params.min_class_bytes > 0.0) || params.max_class_bytes < params.min_class_bytes)
    throw ValidationError("class byte range must satisfy 0 < min <= max");
  for (const auto& lib : params.pool) {
    if (!well_formed(lib.path) || is_obfuscated_package(lib.path))
      throw ValidationError(fmt::format("library path '{}' must be well formed and not obfuscated", lib.path));
    if (lib.path.starts_with("private"))
      throw ValidationError(fmt::format("library path '{}' collides with private packages", lib.path));
    if (lib.classes < 1) throw ValidationError("library class count must be >= 1");
    if (!(lib.inclusion_probability >= 0.0 && lib.inclusion_probability <= 1.0))
      throw ValidationError("inclusion probability must lie in [0, 1]");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> private_classes(params.min_private_classes,
                                                               params.max_private_classes);
  std::uniform_real_distribution<double> class_bytes(params.min_class_bytes, params.max_class_bytes);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  SynthCorpus out;
  for (int i = 0; i < params.n_apps; ++i) {
    AppRecord app;
    app.app_id = fmt::format("app{:04}", i);
    std::set<std::size_t> included;
    for (std::size_t l = 0; l < params.pool.size(); ++l)
      if (coin(rng) < params.pool[l].inclusion_probability) {
        included.insert(l);
        app.packages[params.pool[l].path] += params.pool[l].classes;
      }
    for (int p = 0; p < params.private_packages; ++p)
      app.packages[fmt::format("private{:04}.module{}", i, p)] = private_classes(rng);
    app.dex_size_bytes = std::round(class_bytes(rng)) * static_cast<double>(app.total_classes());
    out.corpus.apps.push_back(std::move(app));
    out.libraries.push_back(std::move(included));
  }
  return out;
}

}  // namespace netoffload
