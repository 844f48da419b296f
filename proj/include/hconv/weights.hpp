#pragma once

#include "hconv/network.hpp"
#include "hconv/tensor_io.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace hconv {

// Archive layout: repeated { name length u32 LE | name bytes | HCT1 record }, names sorted.
//
// Keys: "<layer>.weight" (K,L,Q,Q) and "<layer>.bias" (K,1,1) for convs,
// "<layer>.scale" / "<layer>.shift" (C,1,1) for bn, "fc.weight" (128,C*H*W,1,1) and
// "fc.bias" (128,1,1) for the tail.
using WeightArchive = std::map<std::string, AnyTensor>;

void write_archive(std::ostream& out, const WeightArchive& archive);
WeightArchive read_archive(std::istream& in);
void save_archive(const std::filesystem::path& path, const WeightArchive& archive);
WeightArchive load_archive(const std::filesystem::path& path);

/// Looks up a feature-map-shaped entry and flattens it; throws ValidationError if missing.
std::vector<double> archive_vector(const WeightArchive& archive, const std::string& key, std::size_t expected);
const WeightTensor& archive_weights(const WeightArchive& archive, const std::string& key);

/// Seeded uniform draws in [0, 1). mt19937_64 output is fixed by the standard; the
/// distribution classes are not, so the mapping to [0, 1) is done here.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed);
    double next();
    double next(double lo, double hi) { return lo + (hi - lo) * next(); }

private:
    std::mt19937_64 engine_;
};

/// Float weights for every conv, bn and the tail. Conv kernels are scaled by fan-in so
/// activations stay O(1) through deep stacks.
WeightArchive random_weights(const NetworkSpec& net, std::uint64_t seed);

/// Uniform [-1, 1) feature map.
Tensor random_input(Shape3 shape, std::uint64_t seed);

}  // namespace hconv
