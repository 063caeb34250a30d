#include "memcom/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "memcom/error.hpp"

namespace memcom {
namespace {

constexpr char kMagic[4] = {'M', 'E', 'M', 'T'};

template <typename U>
void put_le(std::ostream& out, U v) {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) throw IoError("truncated MEMT block");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

std::size_t dtype_bytes(DType dtype) {
    switch (dtype) {
        case DType::F64: return 8;
        case DType::F32: return 4;
        case DType::F16: return 2;
        case DType::I8: return 1;
    }
    throw IoError("unknown dtype");
}

std::uint16_t float_to_half(float x) {
    const std::uint32_t f = std::bit_cast<std::uint32_t>(x);
    const std::uint32_t sign = (f >> 16) & 0x8000u;
    const std::uint32_t exp = (f >> 23) & 0xffu;
    std::uint32_t mant = f & 0x7fffffu;
    if (exp == 0xff) return static_cast<std::uint16_t>(sign | 0x7c00u | (mant ? 0x200u : 0u));
    const int e = static_cast<int>(exp) - 127 + 15;
    if (e >= 0x1f) return static_cast<std::uint16_t>(sign | 0x7c00u);
    if (e <= 0) {
        if (e < -10) return static_cast<std::uint16_t>(sign);
        mant |= 0x800000u;
        const int shift = 14 - e;
        std::uint32_t half_mant = mant >> shift;
        const std::uint32_t rem = mant & ((1u << shift) - 1);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half_mant & 1u))) ++half_mant;
        return static_cast<std::uint16_t>(sign | half_mant);
    }
    std::uint32_t h = sign | (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
    const std::uint32_t rem = mant & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // carry into exponent is correct rounding
    return static_cast<std::uint16_t>(h);
}

float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    const std::uint32_t exp = (h >> 10) & 0x1fu;
    std::uint32_t mant = h & 0x3ffu;
    if (exp == 0) {
        if (mant == 0) return std::bit_cast<float>(sign);
        // subnormal
        int e = -1;
        do {
            mant <<= 1;
            ++e;
        } while (!(mant & 0x400u));
        mant &= 0x3ffu;
        return std::bit_cast<float>(sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | (mant << 13));
    }
    if (exp == 0x1f) return std::bit_cast<float>(sign | 0x7f800000u | (mant << 13));
    return std::bit_cast<float>(sign | ((exp + 127 - 15) << 23) | (mant << 13));
}

void write_tensor(std::ostream& out, const Tensor& t, DType dtype, double i8_scale) {
    out.write(kMagic, 4);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double x : t.data()) {
        switch (dtype) {
            case DType::F64: put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x)); break;
            case DType::F32: put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x))); break;
            case DType::F16: put_le<std::uint16_t>(out, float_to_half(static_cast<float>(x))); break;
            case DType::I8: {
                const double q = std::clamp(std::nearbyint(x / i8_scale), -127.0, 127.0);
                put_le<std::uint8_t>(out, static_cast<std::uint8_t>(static_cast<std::int8_t>(q)));
                break;
            }
        }
    }
    if (!out) throw IoError("failed writing MEMT block");
}

Tensor read_tensor(std::istream& in, double i8_scale) {
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kMagic, 4)) {
        throw IoError("missing MEMT magic");
    }
    const auto code = get_le<std::uint8_t>(in);
    if (code > 3) throw IoError("unknown MEMT dtype code " + std::to_string(code));
    const auto dtype = static_cast<DType>(code);
    const auto rank = get_le<std::uint8_t>(in);
    if (rank == 0) throw IoError("MEMT block with rank 0");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(in));
    std::vector<double> data(shape_numel(shape));
    for (auto& x : data) {
        switch (dtype) {
            case DType::F64: x = std::bit_cast<double>(get_le<std::uint64_t>(in)); break;
            case DType::F32: x = std::bit_cast<float>(get_le<std::uint32_t>(in)); break;
            case DType::F16: x = half_to_float(get_le<std::uint16_t>(in)); break;
            case DType::I8: x = static_cast<std::int8_t>(get_le<std::uint8_t>(in)) * i8_scale; break;
        }
    }
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(out, t, dtype);
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_tensor(in);
}

}  // namespace memcom

#include "memcom/checkpoint.hpp"

namespace memcom {

const Tensor& Checkpoint::get(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.tensor;
    }
    throw IoError("checkpoint has no tensor '" + name + "'");
}

void write_checkpoint(std::ostream& out, const KeyValues& header,
                      const std::vector<std::pair<std::string, const Tensor*>>& tensors, DType dtype) {
    out << kCheckpointTag << '\n';
    write_key_values(out, header);
    out << '\n';
    for (const auto& [name, t] : tensors) {
        out << '@' << name << '\n';
        write_tensor(out, *t, dtype);
    }
    if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointTag) throw IoError("not a memcom checkpoint");
    std::string header_text;
    while (std::getline(in, line) && !line.empty()) header_text += line + '\n';
    std::istringstream hs(header_text);
    Checkpoint ck;
    ck.header = parse_key_values(hs);
    while (in.peek() == '@') {
        std::getline(in, line);
        ck.tensors.push_back({line.substr(1), read_tensor(in)});
    }
    if (!in.eof() && in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint");
    return ck;
}

}  // namespace memcom
