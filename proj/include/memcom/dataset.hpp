#pragma once
// Interaction datasets and example generation.
//
// TSV format, UTF-8, one user per line:
//   user_id <TAB> country <TAB> item1,item2,...   (most recent first)

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "memcom/id_batch.hpp"

namespace memcom {

struct UserRecord {
    std::string user_id;
    std::string country;
    std::vector<std::string> items;  // most recent first

    friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

using Dataset = std::vector<UserRecord>;

void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

/// MovieLens ratings (`userId,movieId,rating,timestamp` CSV with header, or
/// `::`-separated .dat). Every rating counts as an interaction; items are
/// ordered newest first. All users share the country key `ml`.
Dataset convert_movielens(std::istream& in);

class VocabMap;

/// Inputs plus one label per row (label = item label index).
struct ExampleBatch {
    IdBatch inputs;
    std::vector<std::int64_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    ExampleBatch subset(const std::vector<std::size_t>& rows) const;

    friend bool operator==(const ExampleBatch&, const ExampleBatch&) = default;
};

struct ExampleOptions {
    std::size_t max_per_user = 5;
    std::uint64_t popularity_floor = 10;  // label item must occur this often in the vocab source
    std::size_t num_labels = 0;           // 0: every item is a valid label
    std::size_t input_len = 128;
};

struct ExampleStats {
    std::size_t users_skipped = 0;    // fewer than two interactions
    std::size_t labels_filtered = 0;  // below the popularity floor or outside num_labels
    std::size_t examples = 0;
};

/// Up to max_per_user examples per user: the label is one of the most recent
/// interactions, the input is the country plus the most recent interactions
/// with every occurrence of the label item removed. Unknown keys are dropped.
ExampleBatch make_ranking_examples(const VocabMap& vocab, const Dataset& data, const ExampleOptions& options,
                                   ExampleStats* stats = nullptr);

/// Preference pairs for RankNet training: the label item is preferred over a
/// sampled item the user never interacted with.
struct PairwiseBatch {
    IdBatch inputs;
    std::vector<std::int64_t> preferred;  // item ids
    std::vector<std::int64_t> other;      // item ids
    std::size_t size() const noexcept { return preferred.size(); }
};

/// Negatives are drawn uniformly from item ids with label index < num_labels.
PairwiseBatch make_pairwise_examples(const VocabMap& vocab, const ExampleBatch& examples, std::size_t num_labels,
                                     std::uint64_t seed);

}  // namespace memcom
