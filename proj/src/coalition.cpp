#include "shapkit/coalition.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "shapkit/rng.hpp"

namespace shapkit {

namespace {

constexpr std::array<std::uint64_t, kMaxExactPlayers + 1> kFactorials = [] {
  std::array<std::uint64_t, kMaxExactPlayers + 1> f{};
  f[0] = 1;
  for (std::size_t i = 1; i < f.size(); ++i) f[i] = f[i - 1] * i;
  return f;
}();

constexpr double kSumTolerance = 1e-9;

void check_agent(const CharacteristicGame& game, int agent) {
  if (agent < 0 || agent >= game.n()) {
    throw OutOfRange("agent " + std::to_string(agent) + " outside 0.." + std::to_string(game.n() - 1));
  }
}

}  // namespace

Coalition Coalition::of(std::initializer_list<int> members) {
  std::uint64_t mask = 0;
  for (int m : members) {
    if (m < 0 || m >= 64) throw OutOfRange("coalition member " + std::to_string(m));
    mask |= std::uint64_t{1} << m;
  }
  return Coalition(mask);
}

int Coalition::size() const { return std::popcount(mask_); }

std::vector<int> Coalition::members() const {
  std::vector<int> out;
  for (std::uint64_t m = mask_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
  return out;
}

CharacteristicGame::CharacteristicGame(int n, ValueOracle value) : n_(n), value_(std::move(value)) {
  if (n < 1 || n > 63) throw InvalidArgument("game size must be in 1..63, got " + std::to_string(n));
  if (!value_) throw InvalidArgument("game has no value oracle");
  const double empty = value_(Coalition{});
  if (empty != 0.0) {
    throw InvalidArgument("value of the empty coalition must be 0, got " + std::to_string(empty));
  }
}

CharacteristicGame CharacteristicGame::from_table(int n, std::vector<double> table) {
  if (n < 1 || n > kMaxExactPlayers) throw InvalidArgument("tabulated games support 1..20 players");
  if (table.size() != (std::size_t{1} << n)) throw InvalidArgument("value table must have 2^n entries");
  auto shared = std::make_shared<const std::vector<double>>(std::move(table));
  return CharacteristicGame(n, [shared](Coalition c) { return (*shared)[c.mask()]; });
}

CharacteristicGame operator+(const CharacteristicGame& a, const CharacteristicGame& b) {
  if (a.n() != b.n()) throw InvalidArgument("cannot add games of different sizes");
  return CharacteristicGame(a.n(), [va = a.oracle(), vb = b.oracle()](Coalition c) { return va(c) + vb(c); });
}

double Allocation::total() const { return std::accumulate(payoffs.begin(), payoffs.end(), 0.0); }

bool TransferPlan::empty() const {
  for (const auto& row : transfers)
    for (double t : row)
      if (t != 0.0) return false;
  return true;
}

std::vector<double> TransferPlan::net() const {
  std::vector<double> out(transfers.size(), 0.0);
  for (std::size_t i = 0; i < transfers.size(); ++i) {
    for (std::size_t j = 0; j < transfers[i].size(); ++j) {
      out[i] -= transfers[i][j];
      out[j] += transfers[i][j];
    }
  }
  return out;
}

double TransferPlan::volume() const {
  double v = 0.0;
  for (const auto& row : transfers) v = std::accumulate(row.begin(), row.end(), v);
  return v;
}

double shapley_weight(int coalition_size, int n) {
  if (n < 1 || n > kMaxExactPlayers || coalition_size < 0 || coalition_size >= n) {
    throw OutOfRange("shapley_weight(" + std::to_string(coalition_size) + ", " + std::to_string(n) + ")");
  }
  // s!(n-s-1)! <= (n-1)! so the numerator product fits in 64 bits.
  const std::uint64_t num = kFactorials[coalition_size] * kFactorials[n - coalition_size - 1];
  return static_cast<double>(num) / static_cast<double>(kFactorials[n]);
}

double marginal_contribution(const CharacteristicGame& game, int agent, Coalition c) {
  check_agent(game, agent);
  if (c.mask() >> game.n() != 0) throw OutOfRange("coalition has members outside the player set");
  if (c.contains(agent)) {
    throw InvalidArgument("agent " + std::to_string(agent) + " is already in the coalition");
  }
  return game.value(c.with(agent)) - game.value(c);
}

Allocation shapley_exact(const CharacteristicGame& game, int enumeration_cap) {
  const int n = game.n();
  const int cap = std::min(enumeration_cap, kMaxExactPlayers);
  if (n > cap) {
    throw ResourceLimitError("exact Shapley enumeration is capped at " + std::to_string(cap) +
                             " players (game has " + std::to_string(n) + "); use shapley_sampled");
  }
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> values(count);
  for (std::size_t m = 0; m < count; ++m) values[m] = game.value(Coalition(m));

  // C(n-1, s) coalitions of size s each carry weight s!(n-s-1)!/n!, i.e. 1/n in
  // total per size: phi_i is the mean over sizes of the per-size mean marginal.
  std::vector<double> binom(n, 1.0);
  for (int s = 1; s < n; ++s) binom[s] = binom[s - 1] * (n - s) / s;

  Allocation out{std::vector<double>(n, 0.0)};
  std::vector<double> by_size(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    std::fill(by_size.begin(), by_size.end(), 0.0);
    for (std::size_t m = 0; m < count; ++m) {
      if (m & bit) continue;
      by_size[std::popcount(m)] += values[m | bit] - values[m];
    }
    double phi = 0.0;
    for (int s = 0; s < n; ++s) phi += by_size[s] / binom[s];
    out.payoffs[i] = phi / n;
  }
  return out;
}

std::pair<double, double> shapley_two_agent(double v1, double v2, double v12) {
  return {0.5 * v1 + 0.5 * (v12 - v2), 0.5 * v2 + 0.5 * (v12 - v1)};
}

Allocation shapley_sampled(const CharacteristicGame& game, std::int64_t samples, std::uint64_t seed,
                           unsigned threads) {
  if (samples < 1) throw InvalidArgument("samples must be >= 1");
  const int n = game.n();
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());

  // Marginals for a block of orderings are computed in parallel into a buffer and
  // then summed in ordering index, so the float result matches a serial run bit for bit.
  constexpr std::int64_t kBlock = 4096;
  std::vector<double> buffer(static_cast<std::size_t>(std::min(samples, kBlock)) * n);
  std::vector<double> sums(n, 0.0);

  auto run_ordering = [&](std::int64_t k, double* marginals) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto engine = make_engine(seed, {static_cast<std::uint64_t>(Stream::kSampling), static_cast<std::uint64_t>(k)});
    std::shuffle(order.begin(), order.end(), engine);
    Coalition c;
    double prev = 0.0;
    for (int agent : order) {
      c = c.with(agent);
      const double v = game.value(c);
      marginals[agent] = v - prev;
      prev = v;
    }
  };

  for (std::int64_t start = 0; start < samples; start += kBlock) {
    const std::int64_t len = std::min(kBlock, samples - start);
    const unsigned workers = static_cast<unsigned>(std::min<std::int64_t>(threads, len));
    if (workers <= 1) {
      for (std::int64_t k = 0; k < len; ++k) run_ordering(start + k, &buffer[k * n]);
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::int64_t k = w; k < len; k += workers) run_ordering(start + k, &buffer[k * n]);
        });
      }
    }
    for (std::int64_t k = 0; k < len; ++k)
      for (int i = 0; i < n; ++i) sums[i] += buffer[k * n + i];
  }

  Allocation out{std::vector<double>(n)};
  for (int i = 0; i < n; ++i) out.payoffs[i] = sums[i] / static_cast<double>(samples);
  return out;
}

TransferPlan side_payments(const Allocation& realized, const Allocation& target) {
  if (realized.size() != target.size()) throw InfeasibleError("allocations differ in length");
  if (std::abs(realized.total() - target.total()) > kSumTolerance) {
    throw InfeasibleError("realized total " + std::to_string(realized.total()) + " differs from target total " +
                          std::to_string(target.total()));
  }
  const std::size_t n = realized.size();
  TransferPlan plan{std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))};

  // surplus > 0 must be paid out, surplus < 0 must be received.
  std::vector<double> surplus(n);
  for (std::size_t i = 0; i < n; ++i) surplus[i] = realized[i] - target[i];

  std::size_t d = 0;
  for (std::size_t p = 0; p < n; ++p) {
    while (surplus[p] > kSumTolerance) {
      while (d < n && surplus[d] >= -kSumTolerance) ++d;
      if (d == n) break;
      const double amount = std::min(surplus[p], -surplus[d]);
      plan.transfers[p][d] += amount;
      surplus[p] -= amount;
      surplus[d] += amount;
    }
  }
  return plan;
}

CharacteristicGame load_game_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("game file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("n") || !doc["n"].is_number_integer()) {
    throw ParseError("game file: expected an object with integer field \"n\"");
  }
  const int n = doc["n"].get<int>();
  if (n < 1 || n > kMaxExactPlayers) throw ParseError("game file: n must be in 1..20");
  if (!doc.contains("values") || !doc["values"].is_object()) {
    throw ParseError("game file: expected object field \"values\"");
  }
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> table(count, 0.0);
  std::vector<bool> seen(count, false);
  for (const auto& [key, val] : doc["values"].items()) {
    if (!val.is_number()) throw ParseError("game file: value for \"" + key + "\" is not a number");
    std::uint64_t mask = 0;
    int last = -1;
    std::stringstream ss(key);
    std::string tok;
    while (!key.empty() && std::getline(ss, tok, ',')) {
      int m = 0;
      try {
        std::size_t used = 0;
        m = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("game file: bad member list \"" + key + "\"");
      }
      if (m < 0 || m >= n || m <= last) {
        throw ParseError("game file: member list \"" + key + "\" must be sorted indices in 0..n-1");
      }
      last = m;
      mask |= std::uint64_t{1} << m;
    }
    table[mask] = val.get<double>();
    seen[mask] = true;
  }
  for (std::size_t m = 0; m < count; ++m) {
    if (!seen[m]) {
      std::string name;
      for (int i : Coalition(m).members()) name += (name.empty() ? "" : ",") + std::to_string(i);
      throw ParseError("game file: missing coalition \"" + name + "\"");
    }
  }
  if (table[0] != 0.0) throw ParseError("game file: value of the empty coalition must be 0");
  return CharacteristicGame::from_table(n, std::move(table));
}

CharacteristicGame load_game_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open game file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_game_json(ss.str());
}

}  // namespace shapkit
