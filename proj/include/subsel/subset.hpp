#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace subsel {

/// Sorted m-subset of the arm indices [0, K).
class Subset {
 public:
  Subset() = default;
  /// Members are sorted on construction; throws ConfigError on duplicates,
  /// out-of-range indices, or an empty member list.
  Subset(std::vector<int> members, int dim_total);
  Subset(std::initializer_list<int> members, int dim_total)
      : Subset(std::vector<int>(members), dim_total) {}

  int size() const { return static_cast<int>(members_.size()); }
  int dim_total() const { return dim_total_; }
  std::span<const int> members() const { return members_; }
  int operator[](int k) const { return members_[static_cast<std::size_t>(k)]; }
  bool contains(int arm) const;

  /// [K] \ members, sorted.
  std::vector<int> complement() const;

  /// Position in the lexicographic enumeration of all m-subsets of [K].
  std::uint64_t rank() const;

  std::string to_string() const;

  friend bool operator==(const Subset&, const Subset&) = default;
  friend auto operator<=>(const Subset& a, const Subset& b) { return a.members_ <=> b.members_; }

 private:
  std::vector<int> members_;
  int dim_total_ = 0;
};

/// C(n, k) in 64-bit arithmetic; 0 when k is outside [0, n].
std::uint64_t binomial(int n, int k);

/// All C(K, m) subsets in lexicographic order. Throws InvalidCardinality unless 1 <= m <= K.
std::vector<Subset> enumerate_subsets(int K, int m);

/// Streams combinations in lexicographic order without materialising them.
/// Returning false from `visit` stops the enumeration early.
void for_each_subset(int K, int m, const std::function<bool(std::span<const int>)>& visit);

/// Inverse of Subset::rank().
Subset subset_from_rank(int K, int m, std::uint64_t rank);

/// Parses "15,16,17" into a subset of [K].
Subset parse_subset(const std::string& text, int K);

}  // namespace subsel

template <>
struct std::hash<subsel::Subset> {
  std::size_t operator()(const subsel::Subset& s) const noexcept {
    std::size_t h = static_cast<std::size_t>(s.dim_total());
    for (int i : s.members()) h = h * 1000003u ^ static_cast<std::size_t>(i);
    return h;
  }
};
