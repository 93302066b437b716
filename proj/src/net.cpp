#include "ecg/net.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace ecg::net {

namespace {

constexpr char kMagic[4] = {'B', 'L', 'T', 'M'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    explicit Reader(const std::string& b) : buf(b) {}

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw FormatError("model file truncated");
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 8;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_model(const std::filesystem::path& path, const ModelState<float>& state) {
    auto tensors = state.tensors();
    const auto& names = tensor_names();

    std::ostringstream header;
    header << "input_dim=" << state.config.input_dim << "\n"
           << "hidden_dim=" << state.config.hidden_dim << "\n"
           << "class_count=" << state.config.class_count << "\n"
           << "dropout_prob=" << state.config.dropout_prob << "\n"
           << "backward_readout_at_start=" << (state.config.backward_readout_at_start ? 1 : 0)
           << "\n"
           << "dropout_seed=" << state.dropout_seed << "\n"
           << "tool_version=" << kToolVersion << "\n";
    const std::string header_text = header.str();

    // Directory entries reference payload offsets relative to the payload
    // base (right after the directory), so lay the directory out first.
    std::string directory;
    std::uint64_t payload_offset = 0;
    put_u32(directory, static_cast<std::uint32_t>(tensors.size()));
    for (int i = 0; i < ModelState<float>::kTensorCount; ++i) {
        const Eigen::MatrixXf& m = *tensors[static_cast<std::size_t>(i)];
        const std::string name = names[static_cast<std::size_t>(i)];
        put_u16(directory, static_cast<std::uint16_t>(name.size()));
        directory += name;
        directory.push_back(2);  // rank
        put_u32(directory, static_cast<std::uint32_t>(m.rows()));
        put_u32(directory, static_cast<std::uint32_t>(m.cols()));
        put_u64(directory, payload_offset);
        payload_offset += static_cast<std::uint64_t>(m.size()) * 4;
    }

    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    out += directory;
    for (const Eigen::MatrixXf* m : tensors) {
        if (!m->allFinite()) throw NumericError("save_model: non-finite parameter");
        // Column-major f32, little-endian.
        for (long c = 0; c < m->cols(); ++c)
            for (long r = 0; r < m->rows(); ++r) {
                float v = (*m)(r, c);
                char b[4];
                std::memcpy(b, &v, 4);
                out.append(b, 4);
            }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open model file for writing: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing model file: " + path.string());
}

ModelState<float> load_model(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open model file: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r(buf);
    if (r.bytes(4) != std::string(kMagic, 4)) throw FormatError("not a model file (bad magic)");
    if (r.u16() != kVersion) throw FormatError("unsupported model file version");
    const std::uint32_t header_len = r.u32();
    const std::string header_text = r.bytes(header_len);

    std::map<std::string, std::string> kv;
    std::istringstream hs(header_text);
    for (std::string line; std::getline(hs, line);) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&kv](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) throw FormatError("model header missing key: " + key);
        return it->second;
    };

    ModelState<float> s;
    s.config.input_dim = std::stoi(get("input_dim"));
    s.config.hidden_dim = std::stoi(get("hidden_dim"));
    s.config.class_count = std::stoi(get("class_count"));
    s.config.dropout_prob = std::stod(get("dropout_prob"));
    s.config.backward_readout_at_start = get("backward_readout_at_start") != "0";
    s.dropout_seed = std::stoull(get("dropout_seed"));

    struct DirEntry {
        std::string name;
        std::uint32_t rows, cols;
        std::uint64_t offset;
    };
    const std::uint32_t count = r.u32();
    if (count != static_cast<std::uint32_t>(ModelState<float>::kTensorCount))
        throw FormatError("model file has unexpected tensor count");
    std::vector<DirEntry> dir;
    dir.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        DirEntry e;
        const std::uint16_t name_len = r.u16();
        e.name = r.bytes(name_len);
        const std::uint8_t rank = r.u8();
        if (rank != 2) throw FormatError("model tensor rank must be 2");
        e.rows = r.u32();
        e.cols = r.u32();
        e.offset = r.u64();
        dir.push_back(std::move(e));
    }
    const std::size_t payload_base = r.pos;

    auto tensors = s.tensors();
    const auto& names = tensor_names();
    for (int i = 0; i < ModelState<float>::kTensorCount; ++i) {
        const DirEntry& e = dir[static_cast<std::size_t>(i)];
        if (e.name != names[static_cast<std::size_t>(i)])
            throw FormatError("model tensor order mismatch at '" + e.name + "'");
        Eigen::MatrixXf& m = *tensors[static_cast<std::size_t>(i)];
        m.resize(e.rows, e.cols);
        const std::size_t need = static_cast<std::size_t>(e.rows) * e.cols * 4;
        const std::size_t at = payload_base + e.offset;
        if (at + need > buf.size()) throw FormatError("model payload truncated");
        std::size_t p = at;
        for (std::uint32_t c = 0; c < e.cols; ++c)
            for (std::uint32_t rr = 0; rr < e.rows; ++rr) {
                float v;
                std::memcpy(&v, buf.data() + p, 4);
                p += 4;
                if (!std::isfinite(v)) throw DataError("model contains non-finite parameter");
                m(rr, c) = v;
            }
    }

    // Shape sanity against the header.
    const int H = s.config.hidden_dim;
    if (s.l1f.W.rows() != 4L * H || s.l1f.W.cols() != s.config.input_dim ||
        s.head_W.rows() != s.config.class_count || s.head_W.cols() != 2L * H)
        throw FormatError("model tensor shapes inconsistent with header");
    return s;
}

}  // namespace ecg::net
