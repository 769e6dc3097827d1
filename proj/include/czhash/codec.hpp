#pragma once

#include "czhash/dataset.hpp"
#include "czhash/encoder.hpp"

#include <cstdint>

namespace czhash {

using PackedCode = std::vector<std::uint64_t>;

// Sign codes kept both as a +-1 matrix and bit-packed words (+1 -> bit 1).
struct HashCodes {
    Matrix codes;  // n x b, entries in {-1,+1}
    std::vector<PackedCode> packed;
    int bits = 0;
};

struct HammingIndex {
    std::vector<PackedCode> packed;
    std::vector<int> ids;
    int bits = 0;
};

PackedCode pack_row(const Eigen::Ref<const Vector>& row);
Vector unpack_row(const PackedCode& packed, int bits);
HashCodes pack_codes(const Matrix& pm_codes);

// Out-of-sample coding: eval-mode forward, ridge inversion of the attribute
// map (c = f A^T (A A^T + eps I)^{-1}), then sign(c W).
Matrix encode_batch(const EncoderParams& params, const AttributeMatrix& attrs,
                    const Matrix& w, const Matrix& x, double epsilon = 1e-8);
Vector encode_query(const EncoderParams& params, const AttributeMatrix& attrs,
                    const Matrix& w, const Eigen::Ref<const Vector>& x,
                    double epsilon = 1e-8);

int hamming_distance(const PackedCode& u, const PackedCode& v, int bits);
int hamming_distance(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

HammingIndex build_index(const HashCodes& codes, const std::vector<int>& ids);

// Ids sorted by ascending Hamming distance, ties broken by ascending id.
// k < 0 returns the full ranking.
std::vector<int> retrieve(const HammingIndex& index, const PackedCode& query, int k = -1);

void save_codes_text(const Matrix& pm_codes, const std::filesystem::path& file);
Matrix load_codes_text(const std::filesystem::path& file);
// Packed binary export with (n, b, word size) header; +1 is stored as bit 1.
void save_codes_packed(const HashCodes& codes, const std::filesystem::path& file);
HashCodes load_codes_packed(const std::filesystem::path& file);

}  // namespace czhash
