#include "numeric/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace masklab::numeric {

static_assert(std::endian::native == std::endian::little,
              "VMT1 serialization assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'V', 'M', 'T', '1'};
constexpr std::uint32_t kMaxRank = 8;
}

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    require(bool(is), ErrorCode::Io, "unexpected end of tensor stream");
    return v;
}

void write_tensor(std::ostream& os, const Tensor& t) {
    require(t.defined(), ErrorCode::InvalidArgument, "cannot serialize an undefined tensor");
    os.write(kMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.data().size() * sizeof(float)));
    require(bool(os), ErrorCode::Io, "tensor write failed");
}

Tensor read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    require(bool(is) && std::memcmp(magic, kMagic, 4) == 0, ErrorCode::Io,
            "not a VMT1 tensor stream");
    std::uint32_t rank = read_u32(is);
    require(rank >= 1 && rank <= kMaxRank, ErrorCode::Io, "tensor rank out of range");
    Shape shape(rank);
    std::int64_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        std::uint32_t d = read_u32(is);
        require(d >= 1 && d <= (1u << 24), ErrorCode::Io, "tensor dimension out of range");
        shape[i] = static_cast<int>(d);
        numel *= d;
    }
    std::vector<float> data(static_cast<std::size_t>(numel));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    require(bool(is), ErrorCode::Io, "tensor payload truncated");
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorCode::Io, "cannot open '" + path + "' for writing");
    write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(bool(is), ErrorCode::NotFound, "cannot open tensor file '" + path + "'");
    return read_tensor(is);
}

}  // namespace masklab::numeric
