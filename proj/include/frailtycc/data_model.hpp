#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace frailtycc {

struct Subject {
  double time = 0.0;  // observed follow-up min(onset, censoring)
  int event = 0;      // 1 if onset observed
  std::vector<double> covariates;

  bool operator==(const Subject&) const = default;
};

/// One family: the proband (index subject) and at least one relative.
struct FamilyRecord {
  Subject proband;
  std::vector<Subject> relatives;

  bool operator==(const FamilyRecord&) const = default;
};

/// A case family (proband had the event) matched to a control family
/// (proband censored at the matching age).
struct MatchedSet {
  FamilyRecord case_family;
  FamilyRecord control_family;

  bool operator==(const MatchedSet&) const = default;
};

struct Dataset {
  std::vector<MatchedSet> matched_sets;
  std::size_t p = 0;          // covariate dimension
  double tau = 0.0;           // maximum follow-up
  std::optional<double> s0;   // left-restriction bound on proband times

  std::size_t n_sets() const noexcept { return matched_sets.size(); }
  std::size_t n_families() const noexcept { return 2 * matched_sets.size(); }
  /// Largest number of relatives in any family.
  std::size_t max_relatives() const noexcept;
  /// Largest observed time over all subjects.
  double max_time() const noexcept;

  bool operator==(const Dataset&) const = default;
};

enum class FamilyRole { Case, Control };

struct Violation {
  std::size_t set_index = 0;
  FamilyRole family = FamilyRole::Case;
  /// -1 for the proband, otherwise the relative's position; -2 for set-level rules.
  long subject = -1;
  std::string rule;

  std::string describe() const;
};

struct ValidationOptions {
  double match_tolerance = 0.0;
  std::size_t m_max = 100;
};

/// Checks every structural assumption of the model. Empty result means valid.
std::vector<Violation> validate(const Dataset& dataset, const ValidationOptions& options = {});

/// CSV schema, one row per subject, header required:
///   set_id,family_role,subject_role,time,event,z1,...,zp
/// family_role is case|control, subject_role is proband|relative. Optional
/// leading `# tau=<x>` and `# s0=<x>` lines carry dataset metadata; without
/// them tau is the largest observed time.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

/// JSON mirror of the CSV: {"tau":..,"s0":..,"subjects":[{"set_id":..,
/// "family_role":..,"subject_role":..,"time":..,"event":..,"z1":..}, ...]}.
Dataset load_json(const std::filesystem::path& path);
void save_json(const Dataset& dataset, const std::filesystem::path& path);

/// Dispatches on the extension (.json, otherwise CSV).
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace frailtycc
