#include "subsel/subset.hpp"

#include <algorithm>
#include <sstream>

#include "subsel/errors.hpp"

namespace subsel {

Subset::Subset(std::vector<int> members, int dim_total)
    : members_(std::move(members)), dim_total_(dim_total) {
  std::sort(members_.begin(), members_.end());
  if (members_.empty() || size() > dim_total_) throw InvalidCardinality(dim_total_, size());
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end())
    throw ConfigError("subset " + to_string() + " has duplicate members");
  if (members_.front() < 0 || members_.back() >= dim_total_)
    throw ConfigError("subset " + to_string() + " has members outside [0, " +
                      std::to_string(dim_total_) + ")");
}

bool Subset::contains(int arm) const {
  return std::binary_search(members_.begin(), members_.end(), arm);
}

std::vector<int> Subset::complement() const {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(dim_total_ - size()));
  auto it = members_.begin();
  for (int i = 0; i < dim_total_; ++i) {
    if (it != members_.end() && *it == i) {
      ++it;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

std::uint64_t Subset::rank() const {
  const int m = size();
  std::uint64_t r = 0;
  int prev = -1;
  for (int i = 0; i < m; ++i) {
    for (int v = prev + 1; v < members_[static_cast<std::size_t>(i)]; ++v)
      r += binomial(dim_total_ - v - 1, m - i - 1);
    prev = members_[static_cast<std::size_t>(i)];
  }
  return r;
}

std::string Subset::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < members_.size(); ++i) os << (i ? "," : "") << members_[i];
  os << '}';
  return os.str();
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

void for_each_subset(int K, int m, const std::function<bool(std::span<const int>)>& visit) {
  if (m < 1 || m > K) throw InvalidCardinality(K, m);
  std::vector<int> c(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) c[static_cast<std::size_t>(i)] = i;
  while (true) {
    if (!visit(c)) return;
    int i = m - 1;
    while (i >= 0 && c[static_cast<std::size_t>(i)] == K - m + i) --i;
    if (i < 0) return;
    ++c[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < m; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
  }
}

std::vector<Subset> enumerate_subsets(int K, int m) {
  if (m < 1 || m > K) throw InvalidCardinality(K, m);
  std::vector<Subset> out;
  out.reserve(binomial(K, m));
  for_each_subset(K, m, [&](std::span<const int> c) {
    out.emplace_back(std::vector<int>(c.begin(), c.end()), K);
    return true;
  });
  return out;
}

Subset subset_from_rank(int K, int m, std::uint64_t rank) {
  if (m < 1 || m > K) throw InvalidCardinality(K, m);
  if (rank >= binomial(K, m)) throw ConfigError("subset rank out of range");
  std::vector<int> c;
  c.reserve(static_cast<std::size_t>(m));
  int v = 0;
  for (int i = 0; i < m; ++i) {
    while (true) {
      const std::uint64_t block = binomial(K - v - 1, m - i - 1);
      if (rank < block) break;
      rank -= block;
      ++v;
    }
    c.push_back(v++);
  }
  return Subset(std::move(c), K);
}

Subset parse_subset(const std::string& text, int K) {
  std::vector<int> members;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      members.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse subset member '" + item + "'");
    }
  }
  return Subset(std::move(members), K);
}

}  // namespace subsel
