#pragma once
// Shared country + item vocabulary with frequency-sorted ids.
//
// id 0 is padding, countries take 1..n and items n+1..n+m, each block in
// descending frequency (ties: first seen first). Item label index
// (classification target) = item id - (n + 1).

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "memcom/dataset.hpp"

namespace memcom {

inline constexpr std::int64_t kPaddingId = 0;

class VocabMap {
  public:
    std::size_t n_countries() const noexcept { return countries_.size(); }
    std::size_t n_items() const noexcept { return items_.size(); }
    /// n + m + 1 (padding included).
    std::size_t size() const noexcept { return 1 + countries_.size() + items_.size(); }

    std::optional<std::int64_t> country_id(const std::string& key) const;
    std::optional<std::int64_t> item_id(const std::string& key) const;

    std::int64_t first_item_id() const noexcept { return static_cast<std::int64_t>(countries_.size()) + 1; }
    bool is_item(std::int64_t id) const noexcept;
    std::int64_t label_of(std::int64_t item_id) const;
    std::int64_t item_of_label(std::int64_t label) const;

    std::uint64_t frequency(std::int64_t id) const;
    const std::string& key_of(std::int64_t id) const;

    friend bool operator==(const VocabMap& a, const VocabMap& b) {
        return a.countries_ == b.countries_ && a.items_ == b.items_;
    }

  private:
    friend class VocabBuilder;

    struct Entry {
        std::string key;
        std::uint64_t count;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    std::vector<Entry> countries_;  // index k -> id k + 1
    std::vector<Entry> items_;      // index k -> id n + 1 + k
    std::unordered_map<std::string, std::int64_t> country_index_;
    std::unordered_map<std::string, std::int64_t> item_index_;
};

/// Accumulates occurrence counts; build() assigns ids.
class VocabBuilder {
  public:
    void add_country(const std::string& key, std::uint64_t count = 1);
    void add_item(const std::string& key, std::uint64_t count = 1);
    /// max_items > 0 keeps only the most frequent items.
    VocabMap build(std::size_t max_items = 0) const;
    bool empty() const noexcept { return countries_.empty() && items_.empty(); }

  private:
    struct Counter {
        std::vector<std::pair<std::string, std::uint64_t>> order;  // first-seen order
        std::unordered_map<std::string, std::size_t> index;
        void add(const std::string& key, std::uint64_t count);
        bool empty() const { return order.empty(); }
    };
    Counter countries_;
    Counter items_;
};

/// Countries are counted once per purchase (item occurrence); items once per
/// occurrence. Throws ArgumentError on an empty dataset.
VocabMap build_vocab(const Dataset& records, std::size_t max_items = 0);

enum class UnknownKey { Throw, Drop };

/// Position 0 holds the country id, then up to len-1 most recent item ids,
/// then padding.
std::vector<std::int64_t> encode_sequence(const VocabMap& vocab, const std::string& country,
                                          const std::vector<std::string>& items_by_recency,
                                          UnknownKey unknown = UnknownKey::Throw, std::size_t len = 128);

}  // namespace memcom
