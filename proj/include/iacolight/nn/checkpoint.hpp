#pragma once

#include "iacolight/core/error.hpp"
#include "iacolight/nn/params.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace iacolight::nn
{
    // Layout: magic "IACLCKPT", u32 version, u32 tensor count, then per tensor
    // u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64. All little-endian.
    inline constexpr std::array<char, 8> kCheckpointMagic{'I', 'A', 'C', 'L', 'C', 'K', 'P', 'T'};
    inline constexpr std::uint32_t kCheckpointVersion = 1;

    namespace ckpt_detail
    {
        template <typename U>
        void put(std::ostream &out, U v)
        {
            for (std::size_t i = 0; i < sizeof(U); ++i)
                out.put(static_cast<char>((v >> (8 * i)) & 0xff));
        }

        template <typename U>
        U get(std::istream &in)
        {
            U v = 0;
            for (std::size_t i = 0; i < sizeof(U); ++i)
            {
                const int c = in.get();
                if (c == std::char_traits<char>::eof())
                    throw ParseError("checkpoint: unexpected end of file");
                v |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * i);
            }
            return v;
        }
    } // namespace ckpt_detail

    inline void write_checkpoint(std::ostream &out, const ParamSet &params)
    {
        using namespace ckpt_detail;
        out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
        put<std::uint32_t>(out, kCheckpointVersion);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
        for (std::size_t i = 0; i < params.size(); ++i)
        {
            const std::string &name = params.name(i);
            put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            put<std::uint64_t>(out, params[i].rows);
            put<std::uint64_t>(out, params[i].cols);
            for (double v : params[i].data)
                put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
        }
    }

    inline ParamSet read_checkpoint(std::istream &in)
    {
        using namespace ckpt_detail;
        std::array<char, 8> magic{};
        in.read(magic.data(), magic.size());
        if (!in || magic != kCheckpointMagic)
            throw ParseError("checkpoint: bad magic");
        const auto version = get<std::uint32_t>(in);
        if (version != kCheckpointVersion)
            throw ParseError("checkpoint: unsupported version " + std::to_string(version));
        const auto count = get<std::uint32_t>(in);
        ParamSet params;
        for (std::uint32_t i = 0; i < count; ++i)
        {
            const auto len = get<std::uint32_t>(in);
            std::string name(len, '\0');
            in.read(name.data(), len);
            if (!in)
                throw ParseError("checkpoint: truncated tensor name");
            const auto rows = get<std::uint64_t>(in);
            const auto cols = get<std::uint64_t>(in);
            Matrix m(rows, cols);
            for (double &v : m.data)
                v = std::bit_cast<double>(get<std::uint64_t>(in));
            params.add(std::move(name), std::move(m));
        }
        return params;
    }

    inline void save_checkpoint(const ParamSet &params, const std::filesystem::path &path)
    {
        if (path.has_parent_path())
            std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write checkpoint '" + path.string() + "'");
        write_checkpoint(out, params);
    }

    inline ParamSet load_checkpoint(const std::filesystem::path &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw IoError("cannot open checkpoint '" + path.string() + "'");
        return read_checkpoint(in);
    }

} // namespace iacolight::nn
