#include "memcom/vocab.hpp"

#include <algorithm>
#include <numeric>

#include "memcom/error.hpp"

namespace memcom {

std::optional<std::int64_t> VocabMap::country_id(const std::string& key) const {
    const auto it = country_index_.find(key);
    if (it == country_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::int64_t> VocabMap::item_id(const std::string& key) const {
    const auto it = item_index_.find(key);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
}

bool VocabMap::is_item(std::int64_t id) const noexcept {
    return id >= first_item_id() && static_cast<std::size_t>(id) < size();
}

std::int64_t VocabMap::label_of(std::int64_t item_id) const {
    if (!is_item(item_id)) throw IndexError("not an item id", item_id);
    return item_id - first_item_id();
}

std::int64_t VocabMap::item_of_label(std::int64_t label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= items_.size()) throw IndexError("label outside item range", label);
    return label + first_item_id();
}

std::uint64_t VocabMap::frequency(std::int64_t id) const {
    if (id == kPaddingId) return 0;
    if (id < 0 || static_cast<std::size_t>(id) >= size()) throw IndexError("id outside vocabulary", id);
    const auto k = static_cast<std::size_t>(id);
    return k <= countries_.size() ? countries_[k - 1].count : items_[k - 1 - countries_.size()].count;
}

const std::string& VocabMap::key_of(std::int64_t id) const {
    static const std::string padding = "<pad>";
    if (id == kPaddingId) return padding;
    if (id < 0 || static_cast<std::size_t>(id) >= size()) throw IndexError("id outside vocabulary", id);
    const auto k = static_cast<std::size_t>(id);
    return k <= countries_.size() ? countries_[k - 1].key : items_[k - 1 - countries_.size()].key;
}

void VocabBuilder::Counter::add(const std::string& key, std::uint64_t count) {
    const auto [it, inserted] = index.try_emplace(key, order.size());
    if (inserted) order.emplace_back(key, count);
    else order[it->second].second += count;
}

void VocabBuilder::add_country(const std::string& key, std::uint64_t count) { countries_.add(key, count); }
void VocabBuilder::add_item(const std::string& key, std::uint64_t count) { items_.add(key, count); }

VocabMap VocabBuilder::build(std::size_t max_items) const {
    if (empty()) throw ArgumentError("cannot build a vocabulary from empty input");
    auto ranked = [](const Counter& c) {
        std::vector<std::size_t> idx(c.order.size());
        std::iota(idx.begin(), idx.end(), 0);
        // stable: equal counts keep first-seen order
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return c.order[a].second > c.order[b].second; });
        return idx;
    };
    VocabMap v;
    for (auto i : ranked(countries_)) {
        v.country_index_[countries_.order[i].first] = static_cast<std::int64_t>(v.countries_.size()) + 1;
        v.countries_.push_back({countries_.order[i].first, countries_.order[i].second});
    }
    auto item_rank = ranked(items_);
    if (max_items > 0 && item_rank.size() > max_items) item_rank.resize(max_items);
    const auto base = static_cast<std::int64_t>(v.countries_.size()) + 1;
    for (auto i : item_rank) {
        v.item_index_[items_.order[i].first] = base + static_cast<std::int64_t>(v.items_.size());
        v.items_.push_back({items_.order[i].first, items_.order[i].second});
    }
    return v;
}

VocabMap build_vocab(const Dataset& records, std::size_t max_items) {
    if (records.empty()) throw ArgumentError("cannot build a vocabulary from an empty dataset");
    VocabBuilder b;
    for (const auto& r : records) {
        b.add_country(r.country, r.items.size());
        for (const auto& it : r.items) b.add_item(it);
    }
    return b.build(max_items);
}

std::vector<std::int64_t> encode_sequence(const VocabMap& vocab, const std::string& country,
                                          const std::vector<std::string>& items_by_recency, UnknownKey unknown,
                                          std::size_t len) {
    if (len < 1) throw ArgumentError("sequence length must be >= 1");
    std::vector<std::int64_t> out(len, kPaddingId);
    const auto cid = vocab.country_id(country);
    if (cid) out[0] = *cid;
    else if (unknown == UnknownKey::Throw) throw IndexError("unknown country key '" + country + "'", -1);
    std::size_t pos = 1;
    for (const auto& key : items_by_recency) {
        if (pos == len) break;  // older interactions are dropped
        const auto id = vocab.item_id(key);
        if (id) out[pos++] = *id;
        else if (unknown == UnknownKey::Throw) throw IndexError("unknown item key '" + key + "'", -1);
    }
    return out;
}

}  // namespace memcom
