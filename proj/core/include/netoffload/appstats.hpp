#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace netoffload {

struct AppRecord {
  std::string app_id;
  std::map<std::string, std::uint64_t> packages;  // dotted path -> class count
  double dex_size_bytes = 0.0;

  std::uint64_t total_classes() const;
};

struct Corpus {
  std::vector<AppRecord> apps;

  // Unique ids, well-formed package paths. Throws ValidationError.
  void validate() const;
};

// One app per line: app_id <TAB> dex_size_bytes <TAB> pkg=count;pkg=count.
// Blank lines and lines starting with '#' are skipped.
Corpus parse_corpus(std::string_view text);
Corpus load_corpus_file(const std::filesystem::path& path);
std::string corpus_to_text(const Corpus& corpus);

struct ObfuscationFilter {
  // Count a one-character segment only when it lies in 'a'..'p', the range
  // where obfuscator-assigned names concentrate.
  bool a_to_p_only = false;
};

// True when any segment is a single character. Throws ValidationError for an
// empty path.
bool is_obfuscated_package(std::string_view path, const ObfuscationFilter& filter = {});

// First `depth` segments joined by dots; empty when the path is shallower.
std::string package_prefix(std::string_view path, int depth);

struct OverlapReport {
  int depth = 0;
  std::map<std::string, double> per_app_unique_fraction;  // percent
  double mean = 0.0;
  double median = 0.0;
  double storage_savings_fraction = 0.0;
};

// Per app: total classes minus classes in non-obfuscated packages whose
// depth-N prefix also occurs in another app, as a percentage. Packages
// shallower than N and obfuscated packages stay unique. Apps without classes
// report 100%.
OverlapReport unique_class_fraction(const Corpus& corpus, int depth, const ObfuscationFilter& filter = {});

// 1 - deduplicated / naive storage. Classes are priced at dex_size / classes
// of their app; each shared prefix group is stored once, at its largest
// instance.
double storage_savings(const Corpus& corpus, int depth, const ObfuscationFilter& filter = {});

// Unique fractions plus storage savings.
OverlapReport overlap_report(const Corpus& corpus, int depth, const ObfuscationFilter& filter = {});
nlohmann::json report_to_json(const OverlapReport& report);

struct LibrarySpec {
  std::string path;  // dotted, non-obfuscated
  std::uint64_t classes = 1;
  double inclusion_probability = 0.5;
};

struct SynthParams {
  int n_apps = 10;
  std::vector<LibrarySpec> pool;
  int private_packages = 3;  // per app, each under a unique top-level segment
  std::uint64_t min_private_classes = 5;
  std::uint64_t max_private_classes = 50;
  double min_class_bytes = 500.0;
  double max_class_bytes = 5000.0;
};

struct SynthCorpus {
  Corpus corpus;
  // Ground truth: app index -> indices into the library pool it includes.
  std::vector<std::set<std::size_t>> libraries;
};

// Deterministic for a seed.
SynthCorpus synth_corpus(const SynthParams& params, std::uint64_t seed);

}  // namespace netoffload
