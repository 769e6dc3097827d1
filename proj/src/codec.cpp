#include "czhash/codec.hpp"

#include "czhash/trainer.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace czhash {

PackedCode pack_row(const Eigen::Ref<const Vector>& row) {
    PackedCode out((row.size() + 63) / 64, 0);
    for (Eigen::Index j = 0; j < row.size(); ++j)
        if (row(j) > 0) out[j / 64] |= (std::uint64_t{1} << (j % 64));
    return out;
}

Vector unpack_row(const PackedCode& packed, int bits) {
    Vector out(bits);
    for (int j = 0; j < bits; ++j)
        out(j) = (packed[j / 64] >> (j % 64)) & 1 ? 1.0 : -1.0;
    return out;
}

HashCodes pack_codes(const Matrix& pm_codes) {
    HashCodes hc;
    hc.codes = pm_codes;
    hc.bits = (int)pm_codes.cols();
    hc.packed.reserve(pm_codes.rows());
    for (Eigen::Index i = 0; i < pm_codes.rows(); ++i)
        hc.packed.push_back(pack_row(pm_codes.row(i).transpose()));
    return hc;
}

Matrix encode_batch(const EncoderParams& params, const AttributeMatrix& attrs,
                    const Matrix& w, const Matrix& x, double epsilon) {
    if (w.rows() != attrs.vectors.rows())
        throw ShapeError("encode: W row count != category count");
    Matrix f = forward(params, x, false).first;
    Matrix c = fit_category(f, attrs, epsilon);
    Matrix u = c * w;
    return u.unaryExpr([](double v) { return sign_pm1(v); });
}

Vector encode_query(const EncoderParams& params, const AttributeMatrix& attrs,
                    const Matrix& w, const Eigen::Ref<const Vector>& x, double epsilon) {
    return encode_batch(params, attrs, w, x.transpose(), epsilon).row(0).transpose();
}

int hamming_distance(const PackedCode& u, const PackedCode& v, int bits) {
    if (u.size() != v.size())
        throw ShapeError("hamming_distance: packed length mismatch");
    int dist = 0;
    for (std::size_t w = 0; w < u.size(); ++w) {
        std::uint64_t x = u[w] ^ v[w];
        if ((int)((w + 1) * 64) > bits && bits % 64 != 0)
            x &= (std::uint64_t{1} << (bits % 64)) - 1;  // ignore padding bits
        dist += std::popcount(x);
    }
    return dist;
}

int hamming_distance(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
    if (u.size() != v.size()) throw ShapeError("hamming_distance: length mismatch");
    return hamming_distance(pack_row(u), pack_row(v), (int)u.size());
}

HammingIndex build_index(const HashCodes& codes, const std::vector<int>& ids) {
    if (ids.size() != codes.packed.size())
        throw ShapeError("build_index: id list length != code count");
    return HammingIndex{codes.packed, ids, codes.bits};
}

std::vector<int> retrieve(const HammingIndex& index, const PackedCode& query, int k) {
    if (index.packed.empty()) throw ConfigError("retrieve: empty index");
    std::vector<std::pair<int, int>> scored;  // (distance, id)
    scored.reserve(index.packed.size());
    for (std::size_t i = 0; i < index.packed.size(); ++i)
        scored.emplace_back(hamming_distance(index.packed[i], query, index.bits),
                            index.ids[i]);
    std::sort(scored.begin(), scored.end());
    std::vector<int> out;
    std::size_t limit = k < 0 ? scored.size() : std::min<std::size_t>(k, scored.size());
    out.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) out.push_back(scored[i].second);
    return out;
}

void save_codes_text(const Matrix& pm_codes, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw ParseError("cannot write " + file.string());
    for (Eigen::Index i = 0; i < pm_codes.rows(); ++i) {
        for (Eigen::Index j = 0; j < pm_codes.cols(); ++j)
            out << (j ? " " : "") << (pm_codes(i, j) > 0 ? 1 : -1);
        out << "\n";
    }
}

Matrix load_codes_text(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open " + file.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        int v;
        while (ss >> v) {
            if (v != 1 && v != -1)
                throw ParseError(file.string() + ":" + std::to_string(lineno) +
                                 ": code entries must be 1 or -1");
            row.push_back((double)v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ShapeError(file.string() + ":" + std::to_string(lineno) +
                             ": inconsistent code length");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(file.string() + ": no codes");
    Matrix m((Eigen::Index)rows.size(), (Eigen::Index)rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m((Eigen::Index)i, (Eigen::Index)j) = rows[i][j];
    return m;
}

namespace {
constexpr char kPackedMagic[8] = {'c', 'z', 'h', 'c', 'o', 'd', 'e', '1'};
}

void save_codes_packed(const HashCodes& codes, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ParseError("cannot write " + file.string());
    std::uint64_t n = codes.packed.size(), b = codes.bits, word = 64;
    out.write(kPackedMagic, 8);
    out.write((const char*)&n, 8);
    out.write((const char*)&b, 8);
    out.write((const char*)&word, 8);
    for (const auto& row : codes.packed)
        out.write((const char*)row.data(), (std::streamsize)(row.size() * 8));
}

HashCodes load_codes_packed(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ParseError("cannot open " + file.string());
    char magic[8];
    std::uint64_t n, b, word;
    in.read(magic, 8);
    in.read((char*)&n, 8);
    in.read((char*)&b, 8);
    in.read((char*)&word, 8);
    if (!in || std::memcmp(magic, kPackedMagic, 8) != 0 || word != 64)
        throw ParseError(file.string() + ": not a packed code file");
    std::size_t words = (b + 63) / 64;
    HashCodes hc;
    hc.bits = (int)b;
    hc.codes.resize((Eigen::Index)n, (Eigen::Index)b);
    for (std::uint64_t i = 0; i < n; ++i) {
        PackedCode row(words);
        in.read((char*)row.data(), (std::streamsize)(words * 8));
        if (!in) throw ParseError(file.string() + ": truncated code data");
        hc.codes.row((Eigen::Index)i) = unpack_row(row, (int)b).transpose();
        hc.packed.push_back(std::move(row));
    }
    return hc;
}

}  // namespace czhash
