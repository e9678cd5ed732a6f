#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qtube {

/// Evaluates a scalar such as `0.25`, `pi/24` or `pi/sqrt(2)`: numbers, pi,
/// sqrt(), parentheses and + - * /.
double parse_scalar(const std::string& text);
/// Whitespace-separated scalars.
std::vector<double> parse_scalar_list(const std::string& text);

/// Flat `key = value` text grouped under `[section]` headers; '#' starts a comment.
/// Keys are stored as `section.key`.
class StudyConfig {
 public:
  static StudyConfig parse(const std::string& text);
  static StudyConfig from_file(const std::string& path);
  static StudyConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();

  /// InvalidInput for keys outside the known schema.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_scalar(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Sorted `section.key = value` lines; the basis of the config hash.
  std::string canonical() const;
  /// 64-bit FNV-1a of canonical().
  std::uint64_t hash() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct Artifact {
  std::string name;
  std::string content;
};

struct StudyOutcome {
  std::string command;
  std::vector<Artifact> artifacts;  // excludes the manifest
  std::string summary;              // one line for the terminal
};

/// Commands: cross-section, effective, tube, broken-line, gamma-lab, invariants.
std::vector<std::string> study_commands();

/// Validates the whole config, runs the study in memory, then writes the
/// artifacts and `run_manifest.json` into out_dir. Nothing is written when
/// validation or the computation fails. An empty command uses study.command.
StudyOutcome run_study(const std::string& command, const StudyConfig& config,
                       const std::string& out_dir);

/// Same without touching the filesystem.
StudyOutcome compute_study(const std::string& command, const StudyConfig& config);

std::string manifest_json(const StudyOutcome& outcome, const StudyConfig& config);

/// Library version string.
const char* version_string();

}  // namespace qtube
