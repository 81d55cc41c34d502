#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sage/dense.hpp"

// Binary gradient-matrix files (.sagegrdm). Layout, little-endian:
//   magic     8 bytes  "SAGEGRDM"
//   version   u32      currently 1
//   n         u64      row count
//   d         u64      columns per row
//   dtype     u8       0 = float32, 1 = float64
//   haslabels u8       0 or 1
//   labels    n * u32  present iff haslabels
//   values    n*d      row-major, 4 or 8 bytes per value
// Declared sizes must match the file length exactly.

namespace sage::data {

enum class GradDtype : std::uint8_t {
    f32 = 0,
    f64 = 1,
};

inline constexpr char kGradMagic[8] = {'S', 'A', 'G', 'E',
                                       'G', 'R', 'D', 'M'};
inline constexpr std::uint32_t kGradVersion = 1;

struct GradientHeader {
    std::uint64_t n = 0;
    std::uint64_t d = 0;
    GradDtype dtype = GradDtype::f64;
    bool has_labels = false;
};

inline constexpr std::size_t kGradHeaderBytes = 8 + 4 + 8 + 8 + 1 + 1;

/// Expected total file size for a header.
std::uint64_t gradient_file_size(const GradientHeader& h);

/// Writes a gradient matrix (optionally labeled). float32 mode range-
/// checks and narrows each value. Values must be finite (DataError).
void write_gradients(const std::string& path, const num::DenseMatrix& g,
                     const std::optional<std::vector<std::uint32_t>>& labels,
                     GradDtype dtype = GradDtype::f64);

struct GradientMatrix {
    num::DenseMatrix values;  // float32 files are upcast to float64
    std::optional<std::vector<std::uint32_t>> labels;
    GradDtype stored_dtype = GradDtype::f64;
};

/// Loads a whole file; FormatError on structural problems (with the byte
/// offset), DataError on non-finite values (with the row index).
GradientMatrix read_gradients(const std::string& path);

/// Header-only read plus validation of the total size.
GradientHeader read_gradient_header(const std::string& path);

/// Streaming reader for one sequential pass over the values section.
class GradientFileReader {
public:
    explicit GradientFileReader(const std::string& path);
    ~GradientFileReader();
    GradientFileReader(const GradientFileReader&) = delete;
    GradientFileReader& operator=(const GradientFileReader&) = delete;

    const GradientHeader& header() const { return header_; }
    const std::optional<std::vector<std::uint32_t>>& labels() const {
        return labels_;
    }

    /// Reads up to max_rows rows into `out` (resized to rows_read x d,
    /// untracked plain storage). Returns the number of rows read; 0 at
    /// end of stream. Checks finiteness (DataError with row index).
    std::size_t read_rows(std::size_t max_rows, std::vector<double>& out);

    std::size_t rows_consumed() const { return rows_consumed_; }

private:
    struct Impl;
    Impl* impl_;
    GradientHeader header_;
    std::optional<std::vector<std::uint32_t>> labels_;
    std::size_t rows_consumed_ = 0;
};

}  // namespace sage::data
