#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "biasdet/errors.hpp"
#include "biasdet/hash.hpp"
#include "biasdet/rng.hpp"

namespace biasdet {

// Named, ordered parameter tensors. Order is the declaration order and fixes
// both the serialization layout and the seeded-init draw sequence.
template <typename Scalar>
class ParamStore {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Entry {
    std::string name;
    std::string group;
    Mat value;
  };

  Mat& add(const std::string& name, const std::string& group,
           Eigen::Index rows, Eigen::Index cols) {
    if (find(name) != nullptr) {
      throw ContractError("param store: duplicate name " + name);
    }
    entries_.push_back(Entry{name, group, Mat::Zero(rows, cols)});
    return entries_.back().value;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  const Mat* find(const std::string& name) const {
    for (const Entry& e : entries_) {
      if (e.name == name) return &e.value;
    }
    return nullptr;
  }

  long long total_elements() const {
    long long n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  // Row-major little-endian float32 image of all tensors in order.
  std::vector<std::uint8_t> to_f32_bytes() const {
    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(total_elements()) * 4);
    for (const Entry& e : entries_) {
      for (Eigen::Index i = 0; i < e.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
          auto bits = std::bit_cast<std::uint32_t>(
              static_cast<float>(e.value(i, j)));
          out.push_back(static_cast<std::uint8_t>(bits & 0xff));
          out.push_back(static_cast<std::uint8_t>((bits >> 8) & 0xff));
          out.push_back(static_cast<std::uint8_t>((bits >> 16) & 0xff));
          out.push_back(static_cast<std::uint8_t>((bits >> 24) & 0xff));
        }
      }
    }
    return out;
  }

  void from_f32_bytes(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() != static_cast<std::size_t>(total_elements()) * 4) {
      throw ContractError("param store: byte image size mismatch");
    }
    std::size_t at = 0;
    for (Entry& e : entries_) {
      for (Eigen::Index i = 0; i < e.value.rows(); ++i) {
        for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
          std::uint32_t bits = static_cast<std::uint32_t>(bytes[at]) |
                               (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
          at += 4;
          e.value(i, j) = static_cast<Scalar>(std::bit_cast<float>(bits));
        }
      }
    }
  }

  std::uint64_t checksum() const {
    auto bytes = to_f32_bytes();
    return fnv1a64_bytes(bytes.data(), bytes.size());
  }

  bool all_finite() const {
    for (const Entry& e : entries_) {
      if (!e.value.allFinite()) return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

// Seeded normal fill in row-major order.
template <typename Scalar>
void fill_normal(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m,
                 Rng& rng, double sigma) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = static_cast<Scalar>(rng.normal() * sigma);
    }
  }
}

}  // namespace biasdet
