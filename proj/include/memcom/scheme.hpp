#pragma once
// Embedding compression schemes behind one lookup interface.
//
// All bucketed schemes hash a frequency-sorted id i with `i mod m`. MEmCom
// composes the hashed row with a learned per-id scalar (and optional bias),
// so every id gets its own embedding while storing only m*e + v (+ v) values.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "memcom/config_file.hpp"
#include "memcom/id_batch.hpp"
#include "memcom/tensor.hpp"

namespace memcom {

enum class SchemeKind {
    Uncompressed,
    ReducedDim,
    TruncateRare,
    NaiveHash,
    DoubleHash,
    QRConcat,
    QRMult,
    Factorized,
    MEmComNoBias,
    MEmComBias,
};

inline constexpr SchemeKind kAllSchemeKinds[] = {
    SchemeKind::Uncompressed, SchemeKind::ReducedDim, SchemeKind::TruncateRare, SchemeKind::NaiveHash,
    SchemeKind::DoubleHash,   SchemeKind::QRConcat,   SchemeKind::QRMult,       SchemeKind::Factorized,
    SchemeKind::MEmComNoBias, SchemeKind::MEmComBias,
};

std::string_view kind_name(SchemeKind kind);
SchemeKind parse_kind(std::string_view name);

bool is_bucketed(SchemeKind kind);
bool is_memcom(SchemeKind kind);

struct DoubleHashConstants {
    std::uint64_t a = 2654435761ULL;
    std::uint64_t b = 1013904223ULL;
    std::uint64_t p = 2147483647ULL;  // 2^31 - 1

    friend bool operator==(const DoubleHashConstants&, const DoubleHashConstants&) = default;
};

struct SchemeConfig {
    SchemeKind kind = SchemeKind::Uncompressed;
    std::size_t vocab = 0;      // v
    std::size_t embed_dim = 0;  // e
    std::size_t buckets = 0;    // m, bucketed kinds
    std::size_t inner_dim = 0;  // h, Factorized
    std::size_t keep_top = 0;   // TruncateRare
    DoubleHashConstants hash2;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the violated constraint.
    void validate() const;
    std::size_t quotient_rows() const;  // ceil(v / m)

    KeyValues to_key_values(const std::string& prefix = "") const;
    static SchemeConfig from_key_values(const KeyValues& kv, const std::string& prefix = "");

    friend bool operator==(const SchemeConfig&, const SchemeConfig&) = default;
};

struct ParamCount {
    std::size_t embedding_params = 0;
    std::string note;
};

/// Exact trainable scalar count of the embedding stage.
ParamCount count_params(const SchemeConfig& config);

/// Trainable tables of one scheme instance.
///
/// `U` is always present (the primary or hashed table). `V` is the quotient
/// table (QR kinds), the second hashed table (DoubleHash) or the v x 1
/// multiplier (MEmCom). `W` is the MEmCom bias, `P` the Factorized projection.
struct SchemeParams {
    SchemeConfig config;
    GradPair U;
    std::optional<GradPair> V;
    std::optional<GradPair> W;
    std::optional<GradPair> P;

    std::vector<std::pair<std::string, GradPair*>> registry();
    std::vector<std::pair<std::string, const GradPair*>> registry() const;
    std::size_t allocated_params() const;
    void zero_grad();
};

SchemeParams build_scheme(const SchemeConfig& config, std::uint64_t rng_seed);

/// Second DoubleHash bucket: ((a*i + b) mod p) mod m.
std::size_t second_hash(const SchemeConfig& config, std::int64_t id);

/// b x l ids -> b x l x e embeddings.
Tensor lookup(const SchemeParams& params, const IdBatch& ids);

/// Accumulates d(loss)/d(table) for every touched row given d(loss)/d(lookup).
void lookup_backward(SchemeParams& params, const IdBatch& ids, const Tensor& dout);

void save_scheme(std::ostream& out, const SchemeParams& params);
void save_scheme(const std::filesystem::path& path, const SchemeParams& params);
SchemeParams load_scheme(std::istream& in);
SchemeParams load_scheme(const std::filesystem::path& path);

}  // namespace memcom
