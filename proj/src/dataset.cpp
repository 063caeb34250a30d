#include "memcom/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "memcom/error.hpp"
#include "memcom/vocab.hpp"

namespace memcom {
namespace {

void check_key(const std::string& key, const char* what) {
    if (key.find_first_of("\t\n\r,") != std::string::npos) {
        throw ArgumentError(std::string(what) + " key '" + key + "' contains a tab, comma or newline");
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
    for (const auto& r : data) {
        check_key(r.user_id, "user");
        check_key(r.country, "country");
        out << r.user_id << '\t' << r.country << '\t';
        for (std::size_t i = 0; i < r.items.size(); ++i) {
            check_key(r.items[i], "item");
            if (i) out << ',';
            out << r.items[i];
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing dataset");
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_dataset(out, data);
}

Dataset read_dataset(std::istream& in) {
    Dataset data;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 3) {
            throw IoError("dataset line " + std::to_string(lineno) + ": expected 3 tab-separated fields, got " +
                          std::to_string(fields.size()));
        }
        UserRecord r{fields[0], fields[1], {}};
        if (!fields[2].empty()) r.items = split(fields[2], ',');
        data.push_back(std::move(r));
    }
    return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_dataset(in);
}

Dataset convert_movielens(std::istream& in) {
    struct Rating {
        long long ts;
        std::size_t order;
        std::string movie;
    };
    std::map<long long, std::vector<Rating>> by_user;
    std::string line;
    std::size_t order = 0, lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        if (line.find("::") != std::string::npos) {
            std::size_t start = 0;
            while (true) {
                const auto pos = line.find("::", start);
                f.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
                if (pos == std::string::npos) break;
                start = pos + 2;
            }
        } else {
            f = split(line, ',');
        }
        if (f.size() < 4) throw IoError("ratings line " + std::to_string(lineno) + ": expected 4 fields");
        if (lineno == 1 && f[0] == "userId") continue;  // csv header
        try {
            by_user[std::stoll(f[0])].push_back({std::stoll(f[3]), order++, "m" + f[1]});
        } catch (const std::exception&) {
            throw IoError("ratings line " + std::to_string(lineno) + ": malformed numeric field");
        }
    }
    Dataset data;
    for (auto& [user, ratings] : by_user) {
        std::stable_sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
            if (a.ts != b.ts) return a.ts > b.ts;
            return a.order > b.order;
        });
        UserRecord r{"u" + std::to_string(user), "ml", {}};
        for (const auto& rt : ratings) r.items.push_back(rt.movie);
        data.push_back(std::move(r));
    }
    return data;
}

ExampleBatch ExampleBatch::subset(const std::vector<std::size_t>& rows) const {
    ExampleBatch out;
    out.inputs = IdBatch(rows.size(), inputs.cols);
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = inputs.row(rows[i]);
        std::copy(src.begin(), src.end(), out.inputs.ids.begin() + static_cast<std::ptrdiff_t>(i * inputs.cols));
        out.labels.push_back(labels[rows[i]]);
    }
    return out;
}

ExampleBatch make_ranking_examples(const VocabMap& vocab, const Dataset& data, const ExampleOptions& options,
                                   ExampleStats* stats) {
    if (options.input_len < 1) throw ArgumentError("input length must be >= 1");
    ExampleStats local;
    std::vector<std::int64_t> flat;
    std::vector<std::int64_t> labels;
    std::vector<std::int64_t> items;
    for (const auto& user : data) {
        items.clear();
        for (const auto& key : user.items) {
            if (const auto id = vocab.item_id(key)) items.push_back(*id);
        }
        if (items.size() < 2) {
            ++local.users_skipped;
            continue;
        }
        const std::int64_t country = vocab.country_id(user.country).value_or(kPaddingId);
        const std::size_t n_labels = std::min(options.max_per_user, items.size());
        for (std::size_t k = 0; k < n_labels; ++k) {
            const std::int64_t label_item = items[k];
            const std::int64_t label = vocab.label_of(label_item);
            if (vocab.frequency(label_item) < options.popularity_floor ||
                (options.num_labels > 0 && static_cast<std::size_t>(label) >= options.num_labels)) {
                ++local.labels_filtered;
                continue;
            }
            const std::size_t row_start = flat.size();
            flat.resize(row_start + options.input_len, kPaddingId);
            flat[row_start] = country;
            std::size_t pos = 1;
            for (auto id : items) {
                if (pos == options.input_len) break;
                if (id != label_item) flat[row_start + pos++] = id;
            }
            labels.push_back(label);
        }
    }
    local.examples = labels.size();
    if (stats) *stats = local;
    ExampleBatch out;
    out.inputs = IdBatch(labels.size(), options.input_len, std::move(flat));
    out.labels = std::move(labels);
    return out;
}

PairwiseBatch make_pairwise_examples(const VocabMap& vocab, const ExampleBatch& examples, std::size_t num_labels,
                                     std::uint64_t seed) {
    const std::size_t n_candidates = num_labels > 0 ? std::min(num_labels, vocab.n_items()) : vocab.n_items();
    if (n_candidates < 2) throw ArgumentError("pairwise examples need at least two candidate items");
    PairwiseBatch out;
    out.inputs = examples.inputs;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(0, static_cast<std::int64_t>(n_candidates) - 1);
    std::unordered_set<std::int64_t> seen;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const std::int64_t hi = vocab.item_of_label(examples.labels[i]);
        seen.clear();
        for (auto id : examples.inputs.row(i)) seen.insert(id);
        std::int64_t lo = hi;
        for (int attempt = 0; attempt < 1000 && (lo == hi || seen.count(lo)); ++attempt) {
            lo = vocab.item_of_label(pick(rng));
        }
        if (lo == hi) lo = vocab.item_of_label((examples.labels[i] + 1) % static_cast<std::int64_t>(n_candidates));
        out.preferred.push_back(hi);
        out.other.push_back(lo);
    }
    return out;
}

}  // namespace memcom
