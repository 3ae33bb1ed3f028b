#include "shapkit/wev.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "shapkit/error.hpp"
#include "shapkit/format.hpp"

namespace shapkit::wev {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Splits one CSV record; double quotes may wrap a field ("" escapes a quote).
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string one_decimal(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << round1(v);
  std::string s = ss.str();
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string signed_adjustment(double v) {
  if (v == 0.0) return "0";
  std::string s = one_decimal(v);
  return v > 0 ? "+" + s : s;
}

std::int64_t parse_count(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ParseError("line " + std::to_string(line) + ": bad count '" + s + "'");
  if (v < 0) throw ParseError("line " + std::to_string(line) + ": negative count");
  return v;
}

double parse_real(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw ParseError("line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void ContributionMatrix::validate() const {
  if (roles.empty()) throw InvalidArgument("contribution matrix needs at least one role");
  if (roles.size() != counts.size()) throw InvalidArgument("roles and count rows differ in length");
  std::set<std::string> seen;
  for (std::size_t r = 0; r < roles.size(); ++r) {
    if (!seen.insert(roles[r]).second) throw InvalidArgument("duplicate role '" + roles[r] + "'");
    for (auto c : counts[r])
      if (c < 0) throw InvalidArgument("negative count for role '" + roles[r] + "'");
  }
}

std::size_t ContributionMatrix::index_of(const std::string& role) const {
  for (std::size_t r = 0; r < roles.size(); ++r)
    if (roles[r] == role) return r;
  throw NotFoundError("unknown role '" + role + "'");
}

void WeightRanges::validate() const {
  for (int i = 0; i < kArtifacts; ++i) {
    const auto& x = w[i];
    if (!(0.0 <= x.lo && x.lo <= x.hi && x.hi <= 1.0)) {
      throw InvalidArgument(std::string("weight range for ") + kArtifactNames[i] + " must satisfy 0 <= lo <= hi <= 1");
    }
  }
}

WeightRanges WeightRanges::from_json(const nlohmann::json& j) {
  WeightRanges out;
  if (!j.is_object()) throw ParseError("weights must be an object of [lo, hi] pairs");
  for (const auto& [k, v] : j.items()) {
    int idx = -1;
    for (int i = 0; i < kArtifacts; ++i)
      if (k == kArtifactNames[i]) idx = i;
    if (idx < 0) throw ParseError("unknown artifact '" + k + "' in weights");
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ParseError("weights for '" + k + "' must be [lo, hi]");
    }
    out.w[idx] = {v[0].get<double>(), v[1].get<double>()};
  }
  out.validate();
  return out;
}

nlohmann::json WeightRanges::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (int i = 0; i < kArtifacts; ++i) j[kArtifactNames[i]] = {w[i].lo, w[i].hi};
  return j;
}

WevRange wev_range(const ContributionMatrix& m, const WeightRanges& w, const std::string& role) {
  const std::size_t r = m.index_of(role);
  WevRange out;
  for (int i = 0; i < kArtifacts; ++i) {
    std::int64_t col = 0;
    for (const auto& row : m.counts) col += row[i];
    if (col == 0) continue;
    const double share = static_cast<double>(m.counts[r][i]) / static_cast<double>(col);
    out.lo += 100.0 * share * w.w[i].lo;
    out.hi += 100.0 * share * w.w[i].hi;
  }
  return out;
}

double minimal_adjustment(double reward_pct, const WevRange& range) {
  if (reward_pct < 0.0) throw InvalidArgument("reward percentage must be non-negative");
  if (reward_pct < range.lo) return range.lo - reward_pct;
  if (reward_pct > range.hi) return range.hi - reward_pct;
  return 0.0;
}

double round1(double v) {
  const double snapped = std::round(v * 1e9) / 1e9;  // 3.7499999999999996 -> 3.75
  const double r = std::round(snapped * 10.0) / 10.0;  // std::round is half away from zero
  return r == 0.0 ? 0.0 : r;
}

Report report(const ContributionMatrix& m, const WeightRanges& w, const std::vector<double>& rewards) {
  m.validate();
  w.validate();
  if (rewards.size() != m.roles.size()) throw InvalidArgument("one reward per role is required");
  Report out;
  for (std::size_t r = 0; r < m.roles.size(); ++r) {
    ReportRow row;
    row.role = m.roles[r];
    row.counts = m.counts[r];
    row.range = wev_range(m, w, m.roles[r]);
    row.reward = rewards[r];
    row.adjustment = round1(minimal_adjustment(rewards[r], row.range));
    out.rows.push_back(row);
  }
  return out;
}

std::string Report::csv() const {
  std::string out = "role,code,dec,doc,fix,wev_lo,wev_hi,reward_pct,adjustment\n";
  for (const auto& r : rows) {
    out += csv_field(r.role);
    for (auto c : r.counts) out += "," + std::to_string(c);
    out += "," + shortest(r.range.lo) + "," + shortest(r.range.hi) + "," + shortest(r.reward) + "," +
           shortest(r.adjustment) + "\n";
  }
  return out;
}

std::string Report::text() const {
  std::size_t role_w = 4;
  for (const auto& r : rows) role_w = std::max(role_w, r.role.size());
  std::ostringstream ss;
  ss << std::left << std::setw(static_cast<int>(role_w)) << "Role" << std::right << std::setw(6) << "Code"
     << std::setw(6) << "Dec." << std::setw(6) << "Docs" << std::setw(7) << "Fixes" << std::setw(13) << "WEV(%)"
     << std::setw(11) << "Reward(%)" << std::setw(9) << "Adj.(%)" << "\n";
  for (const auto& r : rows) {
    ss << std::left << std::setw(static_cast<int>(role_w)) << r.role << std::right;
    ss << std::setw(6) << r.counts[0] << std::setw(6) << r.counts[1] << std::setw(6) << r.counts[2] << std::setw(7)
       << r.counts[3];
    ss << std::setw(13) << (one_decimal(r.range.lo) + "-" + one_decimal(r.range.hi));
    ss << std::setw(11) << shortest(r.reward) << std::setw(9) << signed_adjustment(r.adjustment) << "\n";
  }
  return ss.str();
}

WevInput parse_wev_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  WevInput out;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto fields = split_csv(line);
    if (header.empty()) {
      header = fields;
      const std::vector<std::string> want{"role", "code", "dec", "doc", "fix", "reward_pct"};
      if (header != want) {
        throw ParseError("line " + std::to_string(lineno) + ": header must be role,code,dec,doc,fix,reward_pct");
      }
      continue;
    }
    if (fields.size() != 6) {
      throw ParseError("line " + std::to_string(lineno) + ": expected 6 fields, got " + std::to_string(fields.size()));
    }
    Counts c{};
    for (int i = 0; i < kArtifacts; ++i) c[i] = parse_count(fields[1 + i], lineno);
    out.matrix.roles.push_back(fields[0]);
    out.matrix.counts.push_back(c);
    out.rewards.push_back(parse_real(fields[5], lineno));
  }
  if (header.empty()) throw ParseError("empty contribution file");
  try {
    out.matrix.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return out;
}

WevInput parse_wev_json(const nlohmann::json& j) {
  WevInput out;
  try {
    for (const auto& r : j.at("roles")) {
      Counts c{};
      for (int i = 0; i < kArtifacts; ++i) c[i] = r.value(kArtifactNames[i], std::int64_t{0});
      out.matrix.roles.push_back(r.at("role").get<std::string>());
      out.matrix.counts.push_back(c);
      out.rewards.push_back(r.value("reward_pct", 0.0));
    }
    out.matrix.validate();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("contribution json: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return out;
}

WevInput load_wev_file(const std::string& path) {
  const std::string text = read_file(path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    try {
      return parse_wev_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
  }
  return parse_wev_csv(text);
}

WeightRanges load_weights_file(const std::string& path) {
  try {
    return WeightRanges::from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace shapkit::wev
