#pragma once
// Serialization and run-persistence plumbing: deterministic RNG, shortest
// round-trip decimal formatting, CSV and SVG emission, config hashing.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vacnet {

// Deterministic uniform RNG: mt19937_64 with an explicit 53-bit mapping to
// doubles so streams are bit-identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    // [0, 1), 53 random bits
    double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }
    // zero-mean, unit-std uniform draw: U[-sqrt(3), sqrt(3)]
    double unit_std_uniform();
    // raw 64-bit draw, used to seed per-task child generators
    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

// FNV-1a 64-bit over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

std::string read_file(const std::string& path); // throws on I/O failure
void write_file(const std::string& path, std::string_view content);

// CSV with a fixed column order; every numeric cell uses format_double.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::string to_string() const;
};

// Minimal static SVG line plot: one polyline per series over a shared x axis.
struct SvgSeries {
    std::string label;
    std::vector<double> y;
};
std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::vector<double>& x,
                          const std::vector<SvgSeries>& series,
                          int width = 900, int height = 480);

} // namespace vacnet
