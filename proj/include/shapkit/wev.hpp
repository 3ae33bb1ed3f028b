#pragma once

// Weighted earned value for multi-role projects. Each artifact type (code,
// decisions, docs, fixes) carries a weight interval; a role's share of an
// artifact column times the weight bounds gives its contribution range in
// percent. Comparing a reward against that range yields the smallest change
// that brings it inside.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace shapkit::wev {

inline constexpr int kArtifacts = 4;
enum class Artifact { kCode = 0, kDec = 1, kDoc = 2, kFix = 3 };
inline constexpr std::array<const char*, kArtifacts> kArtifactNames{"code", "dec", "doc", "fix"};

using Counts = std::array<std::int64_t, kArtifacts>;

struct ContributionMatrix {
  std::vector<std::string> roles;
  std::vector<Counts> counts;  // counts[r][artifact]

  /// Throws InvalidArgument: no roles, duplicate role, negative count, size mismatch.
  void validate() const;
  /// Throws NotFoundError.
  std::size_t index_of(const std::string& role) const;
};

struct WeightInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct WeightRanges {
  std::array<WeightInterval, kArtifacts> w{{{0.27, 0.40}, {0.15, 0.35}, {0.05, 0.15}, {0.15, 0.25}}};

  void validate() const;
  /// {"code": [lo, hi], ...}; missing artifacts keep the defaults.
  static WeightRanges from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct WevRange {
  double lo = 0.0;  // percent
  double hi = 0.0;
};

/// Shares are count / column total (a column with total 0 contributes nothing).
WevRange wev_range(const ContributionMatrix& m, const WeightRanges& w, const std::string& role);

/// 0 inside [lo, hi], lo - reward below, hi - reward above. Throws InvalidArgument when reward < 0.
double minimal_adjustment(double reward_pct, const WevRange& range);

/// One decimal, halves away from zero (after snapping off binary noise).
double round1(double v);

struct ReportRow {
  std::string role;
  Counts counts{};
  WevRange range;       // unrounded
  double reward = 0.0;  // percent
  double adjustment = 0.0;  // from the unrounded range, rounded to one decimal
};

struct Report {
  std::vector<ReportRow> rows;

  /// role,code,dec,doc,fix,wev_lo,wev_hi,reward_pct,adjustment (full precision ranges).
  std::string csv() const;
  /// Aligned table with ranges to one decimal.
  std::string text() const;
};

/// Throws InvalidArgument when rewards do not cover every role.
Report report(const ContributionMatrix& m, const WeightRanges& w, const std::vector<double>& rewards);

struct WevInput {
  ContributionMatrix matrix;
  std::vector<double> rewards;
};

/// CSV with header role,code,dec,doc,fix,reward_pct. Throws ParseError with the line.
WevInput parse_wev_csv(const std::string& text);
/// {"roles": [{"role": .., "code": .., "dec": .., "doc": .., "fix": .., "reward_pct": ..}, ...]}
WevInput parse_wev_json(const nlohmann::json& j);
/// Chooses the parser by extension (.json, otherwise CSV).
WevInput load_wev_file(const std::string& path);
WeightRanges load_weights_file(const std::string& path);

}  // namespace shapkit::wev
