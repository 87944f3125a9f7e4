#include "vacnet/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vacnet {

double Rng::unit_std_uniform() {
    // zero mean, unit variance uniform on [-sqrt3, sqrt3]
    constexpr double kSqrt3 = 1.7320508075688772;
    return uniform(-kSqrt3, kSqrt3);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view data) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    if (!in && !in.eof()) throw std::runtime_error("read failed: " + path);
    return os.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string CsvTable::to_string() const {
    std::ostringstream os;
    for (std::size_t c = 0; c < columns.size(); ++c)
        os << (c ? "," : "") << columns[c];
    os << "\n";
    for (const auto& row : rows) {
        if (row.size() != columns.size())
            throw std::runtime_error("csv row width mismatch");
        for (std::size_t c = 0; c < row.size(); ++c)
            os << (c ? "," : "") << format_double(row[c]);
        os << "\n";
    }
    return os.str();
}

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::vector<double>& x,
                          const std::vector<SvgSeries>& series, int width, int height) {
    if (x.empty() || series.empty()) throw std::runtime_error("empty plot");
    for (const auto& s : series)
        if (s.y.size() != x.size()) throw std::runtime_error("series length mismatch");

    double x_lo = x.front(), x_hi = x.back();
    double y_lo = series[0].y[0], y_hi = y_lo;
    for (const auto& s : series)
        for (double v : s.y) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    if (y_hi == y_lo) y_hi = y_lo + 1.0;
    if (x_hi == x_lo) x_hi = x_lo + 1.0;

    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto px = [&](double v) { return ml + (v - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double v) { return mt + ph - (v - y_lo) / (y_hi - y_lo) * ph; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
       << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << x_label << "</text>\n";
    // frame and axis ticks
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
       << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        double xv = x_lo + (x_hi - x_lo) * k / 4.0;
        double yv = y_lo + (y_hi - y_lo) * k / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << mt + ph + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
           << format_double(std::round(xv * 1e3) / 1e3) << "</text>\n";
        os << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 3
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
           << format_double(std::round(yv * 1e3) / 1e3) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % 8];
        os << "<polyline fill=\"none\" stroke=\"" << color
           << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t k = 0; k < x.size(); ++k)
            os << px(x[k]) << "," << py(series[s].y[k]) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << ml + 8 << "\" y=\"" << mt + 14 + 14 * s
           << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << color << "\">"
           << series[s].label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace vacnet
