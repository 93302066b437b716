#include "ecg/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace ecg {

namespace {

constexpr std::array<const char*, kClassCount> kClassNames = {
    "Normal", "AF", "I-AVB", "LBBB", "RBBB", "PAC", "PVC", "STD", "STE"};

void write_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f32(std::ostream& os, float v) {
    static_assert(sizeof(float) == 4);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

std::uint16_t read_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

float read_f32(std::istream& is) {
    std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

bool is_ecgb(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    char magic[4] = {};
    is.read(magic, 4);
    return is.gcount() == 4 && std::memcmp(magic, "ECGB", 4) == 0;
}

EcgRecording load_recording_ecgb(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, "ECGB", 4) != 0)
        throw FormatError(path.string() + ": bad ECGB magic");
    std::uint16_t version = read_u16(is);
    if (version != 1) throw FormatError(path.string() + ": unsupported ECGB version");
    read_u16(is);  // reserved
    std::uint16_t leads = read_u16(is);
    float rate = read_f32(is);
    std::uint32_t count = read_u32(is);
    if (!is) throw FormatError(path.string() + ": truncated ECGB header");
    if (leads == 0 || count == 0)
        throw FormatError(path.string() + ": empty ECGB recording");
    if (!(rate > 0.0f) || !std::isfinite(rate))
        throw FormatError(path.string() + ": invalid sampling rate");

    EcgRecording rec;
    rec.record_id = path.stem().string();
    rec.sampling_rate = rate;
    rec.samples.resize(leads, count);
    std::vector<float> row(count);
    for (int l = 0; l < leads; ++l) {
        is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(count) * 4);
        if (static_cast<std::uint32_t>(is.gcount()) != count * 4)
            throw FormatError(path.string() + ": truncated ECGB payload");
        for (std::uint32_t i = 0; i < count; ++i) {
            // Stored little-endian; this code targets little-endian hosts.
            if (!std::isfinite(row[i]))
                throw DataError(path.string() + ": non-finite sample");
            rec.samples(l, static_cast<long>(i)) = row[i];
        }
    }
    return rec;
}

EcgRecording load_recording_csv(const std::filesystem::path& path, float rate) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::vector<std::array<float, 12>> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        std::array<float, 12> row{};
        int col = 0;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            if (col >= 12) {
                ++col;  // count overflow columns, report below
                continue;
            }
            try {
                std::size_t pos = 0;
                row[static_cast<std::size_t>(col)] = std::stof(cell, &pos);
                // allow trailing \r / spaces
                while (pos < cell.size() && (cell[pos] == '\r' || cell[pos] == ' ')) ++pos;
                if (pos != cell.size()) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
            ++col;
        }
        if (first && !numeric) {
            first = false;  // header row
            continue;
        }
        first = false;
        if (col != 12)
            throw FormatError(path.string() + ": expected 12 CSV columns, got " +
                              std::to_string(col));
        if (!numeric) throw FormatError(path.string() + ": non-numeric CSV cell");
        for (float v : row)
            if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite sample");
        rows.push_back(row);
    }
    if (rows.empty()) throw FormatError(path.string() + ": empty CSV recording");

    EcgRecording rec;
    rec.record_id = path.stem().string();
    rec.sampling_rate = rate;
    rec.samples.resize(12, static_cast<long>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int l = 0; l < 12; ++l) rec.samples(l, static_cast<long>(i)) = rows[i][static_cast<std::size_t>(l)];
    return rec;
}

}  // namespace

const char* to_string(ClassLabel c) {
    int i = ordinal(c);
    if (i < 0 || i >= kClassCount) throw ArgumentError("bad ClassLabel ordinal");
    return kClassNames[static_cast<std::size_t>(i)];
}

ClassLabel parse_class_label(const std::string& s) {
    for (int i = 0; i < kClassCount; ++i)
        if (s == kClassNames[static_cast<std::size_t>(i)]) return static_cast<ClassLabel>(i);
    throw VocabularyError("unknown class label: '" + s + "'");
}

ClassLabel class_from_ordinal(int i) {
    if (i < 0 || i >= kClassCount) throw ArgumentError("class ordinal out of range");
    return static_cast<ClassLabel>(i);
}

std::size_t DatasetIndex::count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(),
                      [s](const DatasetEntry& e) { return e.split == s; }));
}

EcgRecording load_recording(const std::filesystem::path& path, float csv_rate) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    if (is_ecgb(path)) return load_recording_ecgb(path);
    if (!(csv_rate > 0.0f)) throw ArgumentError("CSV ingestion needs a positive sampling rate");
    return load_recording_csv(path, csv_rate);
}

void write_recording(const std::filesystem::path& path, const EcgRecording& rec) {
    if (rec.samples.size() == 0) throw ArgumentError("refusing to write empty recording");
    if (!rec.samples.allFinite()) throw DataError("non-finite sample in recording");
    if (rec.lead_count() > 0xffff || rec.sample_count() > 0xffffffffL)
        throw ArgumentError("recording too large for ECGB format");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os.write("ECGB", 4);
    write_u16(os, 1);  // version
    write_u16(os, 0);  // reserved
    write_u16(os, static_cast<std::uint16_t>(rec.lead_count()));
    write_f32(os, rec.sampling_rate);
    write_u32(os, static_cast<std::uint32_t>(rec.sample_count()));
    for (int l = 0; l < rec.lead_count(); ++l)
        for (long i = 0; i < rec.sample_count(); ++i) write_f32(os, rec.samples(l, i));
    if (!os) throw IoError("write failed: " + path.string());
}

std::vector<LabelSet> load_labels(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::vector<LabelSet> out;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(is, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        LabelSet set;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            if (col == 0) {
                set.record_id = cell;
            } else {
                set.labels.push_back(parse_class_label(cell));
            }
            ++col;
        }
        if (set.record_id.empty() || set.labels.empty() || set.labels.size() > 3)
            throw FormatError(path.string() + ": label row needs id plus 1-3 labels: '" +
                              line + "'");
        for (std::size_t i = 0; i < set.labels.size(); ++i)
            for (std::size_t j = i + 1; j < set.labels.size(); ++j)
                if (set.labels[i] == set.labels[j])
                    throw FormatError(path.string() + ": duplicate label for " + set.record_id);
        if (!seen.insert(set.record_id).second)
            throw IndexError(path.string() + ": duplicate record_id " + set.record_id);
        out.push_back(std::move(set));
    }
    return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabelSet>& sets) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    for (const LabelSet& s : sets) {
        os << s.record_id;
        for (ClassLabel c : s.labels) os << ',' << to_string(c);
        os << '\n';
    }
}

DatasetIndex split_dataset(const DatasetIndex& index, double ratio, std::uint64_t seed) {
    if (index.entries.empty()) throw ArgumentError("split_dataset: empty index");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("split_dataset: ratio must be in (0,1)");
    std::vector<std::size_t> order(index.entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(index.entries.size())));
    n_train = std::min(n_train, index.entries.size());
    DatasetIndex out;
    out.entries.reserve(index.entries.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        DatasetEntry e = index.entries[order[pos]];
        e.split = pos < n_train ? Split::train : Split::validation;
        out.entries.push_back(std::move(e));
    }
    return out;
}

std::array<long, kClassCount> dataset_stats(const std::vector<LabelSet>& labelsets) {
    std::array<long, kClassCount> counts{};
    for (const LabelSet& s : labelsets) ++counts[static_cast<std::size_t>(ordinal(s.primary()))];
    return counts;
}

}  // namespace ecg
