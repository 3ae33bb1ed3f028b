#pragma once

// Characteristic-function games: exact and sampled Shapley values, and
// side-payment plans that move realized payoffs onto a target allocation.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shapkit/error.hpp"

namespace shapkit {

/// A subset of {0..n-1} stored as a bitmask (bit i = agent i).
class Coalition {
 public:
  constexpr Coalition() = default;
  constexpr explicit Coalition(std::uint64_t mask) : mask_(mask) {}

  static Coalition of(std::initializer_list<int> members);
  static constexpr Coalition grand(int n) {
    return Coalition(n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1);
  }

  constexpr std::uint64_t mask() const { return mask_; }
  constexpr bool contains(int i) const { return (mask_ >> i) & 1U; }
  constexpr bool empty() const { return mask_ == 0; }
  int size() const;

  constexpr Coalition with(int i) const { return Coalition(mask_ | (std::uint64_t{1} << i)); }
  constexpr Coalition without(int i) const { return Coalition(mask_ & ~(std::uint64_t{1} << i)); }

  std::vector<int> members() const;

  friend constexpr bool operator==(Coalition a, Coalition b) = default;

 private:
  std::uint64_t mask_ = 0;
};

using ValueOracle = std::function<double(Coalition)>;

/// A normalized transferable-utility game. The oracle must be pure.
class CharacteristicGame {
 public:
  /// Throws InvalidArgument when n < 1, n > 63 or value(empty) != 0.
  CharacteristicGame(int n, ValueOracle value);

  /// Game from an explicit table indexed by coalition mask (size 2^n).
  static CharacteristicGame from_table(int n, std::vector<double> table);

  int n() const { return n_; }
  double value(Coalition c) const { return value_(c); }
  const ValueOracle& oracle() const { return value_; }

  /// Pointwise sum of the two value oracles.
  friend CharacteristicGame operator+(const CharacteristicGame& a, const CharacteristicGame& b);

 private:
  int n_;
  ValueOracle value_;
};

/// Per-agent payoff vector.
struct Allocation {
  std::vector<double> payoffs;

  std::size_t size() const { return payoffs.size(); }
  double operator[](std::size_t i) const { return payoffs[i]; }
  double total() const;
};

/// transfers[i][j] is the amount agent i pays agent j.
struct TransferPlan {
  std::vector<std::vector<double>> transfers;

  bool empty() const;
  /// Net change per agent: received minus paid.
  std::vector<double> net() const;
  double volume() const;
};

inline constexpr int kDefaultEnumerationCap = 16;
inline constexpr int kMaxExactPlayers = 20;

/// |C|!(n-|C|-1)!/n!, factorials held as exact 64-bit integers.
double shapley_weight(int coalition_size, int n);

double marginal_contribution(const CharacteristicGame& game, int agent, Coalition c);

/// Subset enumeration over all 2^n coalitions (values memoized once).
Allocation shapley_exact(const CharacteristicGame& game, int enumeration_cap = kDefaultEnumerationCap);

/// Shapley values of a two-player normalized game given v({1}), v({2}), v({1,2}).
std::pair<double, double> shapley_two_agent(double v1, double v2, double v12);

/// Monte Carlo over uniformly random orderings. Each ordering k draws from its
/// own stream derived from (seed, k), so the result does not depend on `threads`.
Allocation shapley_sampled(const CharacteristicGame& game, std::int64_t samples, std::uint64_t seed,
                           unsigned threads = 0);

/// Minimal-volume plan taking `realized` to `target`; surplus agents pay
/// deficit agents greedily in index order.
TransferPlan side_payments(const Allocation& realized, const Allocation& target);

/// Parses the game-file JSON: {"n": int, "values": {"": 0, "0": .., "0,1": ..}}.
CharacteristicGame load_game_json(const std::string& text);
CharacteristicGame load_game_file(const std::string& path);

}  // namespace shapkit
