#include "sage/gradient_file.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sage/errors.hpp"

namespace sage::data {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms unsupported");

template <typename T>
void store_le(T value, unsigned char* out) {
    std::memcpy(out, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(out, out + sizeof(T));
    }
}

template <typename T>
T load_le(const unsigned char* in) {
    T value;
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char tmp[sizeof(T)];
        std::memcpy(tmp, in, sizeof(T));
        std::reverse(tmp, tmp + sizeof(T));
        std::memcpy(&value, tmp, sizeof(T));
    } else {
        std::memcpy(&value, in, sizeof(T));
    }
    return value;
}

std::size_t value_bytes(GradDtype dtype) {
    return dtype == GradDtype::f32 ? 4 : 8;
}

void write_header(std::ofstream& out, const GradientHeader& h) {
    unsigned char buf[kGradHeaderBytes];
    std::memcpy(buf, kGradMagic, 8);
    store_le<std::uint32_t>(kGradVersion, buf + 8);
    store_le<std::uint64_t>(h.n, buf + 12);
    store_le<std::uint64_t>(h.d, buf + 20);
    buf[28] = static_cast<unsigned char>(h.dtype);
    buf[29] = h.has_labels ? 1 : 0;
    out.write(reinterpret_cast<const char*>(buf), sizeof(buf));
}

GradientHeader parse_header(std::ifstream& in, const std::string& path,
                            std::uint64_t file_size) {
    unsigned char buf[kGradHeaderBytes];
    if (file_size < kGradHeaderBytes) {
        throw FormatError(path + ": truncated header, file has " +
                          std::to_string(file_size) + " bytes at offset 0");
    }
    in.read(reinterpret_cast<char*>(buf), sizeof(buf));
    if (!in) {
        throw IoError(path + ": header read failed");
    }
    if (std::memcmp(buf, kGradMagic, 8) != 0) {
        throw FormatError(path + ": bad magic at offset 0");
    }
    const std::uint32_t version = load_le<std::uint32_t>(buf + 8);
    if (version != kGradVersion) {
        throw FormatError(path + ": unsupported version " +
                          std::to_string(version) + " at offset 8");
    }
    GradientHeader h;
    h.n = load_le<std::uint64_t>(buf + 12);
    h.d = load_le<std::uint64_t>(buf + 20);
    if (buf[28] > 1) {
        throw FormatError(path + ": unknown dtype code " +
                          std::to_string(int(buf[28])) + " at offset 28");
    }
    h.dtype = static_cast<GradDtype>(buf[28]);
    if (buf[29] > 1) {
        throw FormatError(path + ": bad label flag at offset 29");
    }
    h.has_labels = (buf[29] == 1);

    const std::uint64_t expected = gradient_file_size(h);
    if (file_size != expected) {
        throw FormatError(path + ": declared sizes need " +
                          std::to_string(expected) + " bytes but file has " +
                          std::to_string(file_size) +
                          (file_size < expected ? "; truncated at offset "
                                                : "; trailing data at offset ") +
                          std::to_string(std::min(file_size, expected)));
    }
    return h;
}

std::uint64_t file_size_of(const std::string& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        throw IoError(path + ": " + ec.message());
    }
    return size;
}

}  // namespace

std::uint64_t gradient_file_size(const GradientHeader& h) {
    std::uint64_t size = kGradHeaderBytes;
    if (h.has_labels) {
        size += h.n * 4;
    }
    size += h.n * h.d * value_bytes(h.dtype);
    return size;
}

void write_gradients(const std::string& path, const num::DenseMatrix& g,
                     const std::optional<std::vector<std::uint32_t>>& labels,
                     GradDtype dtype) {
    if (labels.has_value() && labels->size() != g.rows()) {
        throw ShapeError(path + ": label count does not match rows");
    }
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
            const double v = g.at(r, c);
            if (!std::isfinite(v)) {
                throw DataError(path + ": non-finite value in row " +
                                std::to_string(r));
            }
            if (dtype == GradDtype::f32 &&
                std::abs(v) > double(std::numeric_limits<float>::max())) {
                throw DataError(path + ": row " + std::to_string(r) +
                                " overflows float32");
            }
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(path + ": cannot open for writing");
    }
    GradientHeader h{g.rows(), g.cols(), dtype, labels.has_value()};
    write_header(out, h);

    if (labels.has_value()) {
        std::vector<unsigned char> lab(labels->size() * 4);
        for (std::size_t i = 0; i < labels->size(); ++i) {
            store_le<std::uint32_t>((*labels)[i], lab.data() + 4 * i);
        }
        out.write(reinterpret_cast<const char*>(lab.data()), lab.size());
    }

    const std::size_t vb = value_bytes(dtype);
    std::vector<unsigned char> row(g.cols() * vb);
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
            if (dtype == GradDtype::f32) {
                store_le<float>(static_cast<float>(g.at(r, c)),
                                row.data() + c * vb);
            } else {
                store_le<double>(g.at(r, c), row.data() + c * vb);
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) {
        throw IoError(path + ": write failed");
    }
}

struct GradientFileReader::Impl {
    std::ifstream in;
    std::string path;
    std::vector<unsigned char> raw;
};

GradientFileReader::GradientFileReader(const std::string& path)
    : impl_(new Impl) {
    impl_->path = path;
    const std::uint64_t fsize = file_size_of(path);
    impl_->in.open(path, std::ios::binary);
    if (!impl_->in) {
        delete impl_;
        throw IoError(path + ": cannot open for reading");
    }
    try {
        header_ = parse_header(impl_->in, path, fsize);
        if (header_.has_labels) {
            std::vector<unsigned char> lab(header_.n * 4);
            impl_->in.read(reinterpret_cast<char*>(lab.data()), lab.size());
            if (!impl_->in) {
                throw IoError(path + ": label read failed");
            }
            std::vector<std::uint32_t> labels(header_.n);
            for (std::size_t i = 0; i < header_.n; ++i) {
                labels[i] = load_le<std::uint32_t>(lab.data() + 4 * i);
            }
            labels_ = std::move(labels);
        }
    } catch (...) {
        delete impl_;
        throw;
    }
}

GradientFileReader::~GradientFileReader() {
    delete impl_;
}

std::size_t GradientFileReader::read_rows(std::size_t max_rows,
                                          std::vector<double>& out) {
    const std::size_t remaining =
        static_cast<std::size_t>(header_.n) - rows_consumed_;
    const std::size_t want = std::min(max_rows, remaining);
    const std::size_t d = static_cast<std::size_t>(header_.d);
    out.resize(want * d);
    if (want == 0) {
        return 0;
    }

    const std::size_t vb = value_bytes(header_.dtype);
    impl_->raw.resize(want * d * vb);
    impl_->in.read(reinterpret_cast<char*>(impl_->raw.data()),
                   impl_->raw.size());
    if (!impl_->in) {
        throw IoError(impl_->path + ": value read failed");
    }
    for (std::size_t i = 0; i < want * d; ++i) {
        const unsigned char* src = impl_->raw.data() + i * vb;
        const double v = (header_.dtype == GradDtype::f32)
                             ? double(load_le<float>(src))
                             : load_le<double>(src);
        if (!std::isfinite(v)) {
            throw DataError(impl_->path + ": non-finite value in row " +
                            std::to_string(rows_consumed_ + i / d));
        }
        out[i] = v;
    }
    rows_consumed_ += want;
    return want;
}

GradientHeader read_gradient_header(const std::string& path) {
    GradientFileReader reader(path);
    return reader.header();
}

GradientMatrix read_gradients(const std::string& path) {
    GradientFileReader reader(path);
    const GradientHeader& h = reader.header();

    GradientMatrix gm;
    gm.stored_dtype = h.dtype;
    gm.labels = reader.labels();
    gm.values = num::DenseMatrix(static_cast<std::size_t>(h.n),
                                 static_cast<std::size_t>(h.d));
    std::vector<double> block;
    std::size_t row = 0;
    while (true) {
        const std::size_t got = reader.read_rows(1024, block);
        if (got == 0) {
            break;
        }
        std::memcpy(gm.values.row(row), block.data(),
                    got * h.d * sizeof(double));
        row += got;
    }
    return gm;
}

}  // namespace sage::data
