#include "mrkp/pairs.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace mrkp {
namespace {

void write_list(std::ostream& out, const std::vector<std::size_t>& v) {
  out << v.size();
  for (auto x : v) out << ' ' << x;
  out << '\n';
}

std::vector<std::size_t> read_list(std::istream& in) {
  std::size_t n = 0;
  in >> n;
  std::vector<std::size_t> v(n);
  for (auto& x : v) in >> x;
  return v;
}

}  // namespace

PairSampler::PairSampler(std::size_t dataset_size, std::uint64_t seed) : rng_(seed) {
  require(dataset_size >= 2, ErrorKind::kArgument, "pairing needs at least 2 clouds");
  std::vector<std::size_t> all(dataset_size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng_);
  const std::size_t half = dataset_size / 2;
  group_a_.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(half));
  group_b_.assign(all.begin() + static_cast<std::ptrdiff_t>(half), all.end());
  order_a_ = group_a_;
  order_b_ = group_b_;
  std::shuffle(order_a_.begin(), order_a_.end(), rng_);
  std::shuffle(order_b_.begin(), order_b_.end(), rng_);
}

std::size_t PairSampler::draw(std::vector<std::size_t>& order, std::size_t& cursor) {
  if (cursor == order.size()) {
    std::shuffle(order.begin(), order.end(), rng_);
    cursor = 0;
  }
  return order[cursor++];
}

IndexPair PairSampler::next() {
  require(!group_a_.empty() && !group_b_.empty(), ErrorKind::kArgument, "pair sampler is not initialized");
  const std::size_t a = draw(order_a_, cursor_a_);
  const std::size_t b = draw(order_b_, cursor_b_);
  return {a, b};
}

std::vector<IndexPair> PairSampler::take(std::size_t count) {
  std::vector<IndexPair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(next());
  return out;
}

std::string PairSampler::serialize() const {
  std::ostringstream out;
  out << rng_ << '\n';
  write_list(out, group_a_);
  write_list(out, group_b_);
  write_list(out, order_a_);
  write_list(out, order_b_);
  out << cursor_a_ << ' ' << cursor_b_ << '\n';
  return out.str();
}

PairSampler PairSampler::deserialize(const std::string& text) {
  std::istringstream in(text);
  PairSampler s;
  in >> s.rng_;
  s.group_a_ = read_list(in);
  s.group_b_ = read_list(in);
  s.order_a_ = read_list(in);
  s.order_b_ = read_list(in);
  in >> s.cursor_a_ >> s.cursor_b_;
  require(static_cast<bool>(in), ErrorKind::kParse, "corrupt pair sampler state");
  require(s.cursor_a_ <= s.order_a_.size() && s.cursor_b_ <= s.order_b_.size(), ErrorKind::kParse,
          "pair sampler cursor out of range");
  return s;
}

bool PairSampler::operator==(const PairSampler& other) const {
  return rng_ == other.rng_ && group_a_ == other.group_a_ && group_b_ == other.group_b_ &&
         order_a_ == other.order_a_ && order_b_ == other.order_b_ && cursor_a_ == other.cursor_a_ &&
         cursor_b_ == other.cursor_b_;
}

std::vector<IndexPair> make_pairs(const std::vector<PointCloud>& clouds, std::uint64_t seed,
                                  std::size_t epoch_pairs) {
  require(clouds.size() >= 2, ErrorKind::kArgument, "pairing needs at least 2 clouds");
  for (const auto& c : clouds) {
    require(c.category == clouds.front().category, ErrorKind::kArgument,
            "pairing mixes categories '" + clouds.front().category + "' and '" + c.category + "'");
  }
  PairSampler sampler(clouds.size(), seed);
  return sampler.take(epoch_pairs);
}

}  // namespace mrkp
