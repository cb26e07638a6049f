#include "m2dl/bundle.hpp"

#include "m2dl/error.hpp"

#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace m2dl {

BundleWriter::BundleWriter(std::ostream& out, std::string_view magic, int version) : out_(out) {
    out_ << magic << ' ' << version << '\n';
}

void BundleWriter::put(std::string_view key, std::string_view value) {
    out_ << key << ' ' << value << '\n';
}

void BundleWriter::put(std::string_view key, double value) { put(key, format_double(value)); }

void BundleWriter::put(std::string_view key, std::size_t value) { put(key, std::to_string(value)); }

void BundleWriter::put_matrix(std::string_view name, const Matrix& m) {
    out_ << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    write_csv(out_, m);
}

void BundleWriter::put_vector(std::string_view name, const std::vector<double>& v) {
    out_ << "vector " << name << ' ' << v.size() << '\n';
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out_ << ',';
        out_ << format_double(v[i]);
    }
    out_ << '\n';
}

BundleReader::BundleReader(std::istream& in, std::string_view magic, int max_version) : in_(in) {
    std::istringstream header(next_line());
    std::string found;
    header >> found >> version_;
    if (found != magic) fail("expected '" + std::string(magic) + "' header, found '" + found + "'");
    if (version_ < 1 || version_ > max_version) fail("unsupported version " + std::to_string(version_));
}

std::string BundleReader::next_line() {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of bundle");
    ++lineno_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

void BundleReader::fail(const std::string& msg) const {
    throw Error(Errc::Parse, "bundle line " + std::to_string(lineno_) + ": " + msg);
}

std::string BundleReader::get(std::string_view key) {
    const std::string line = next_line();
    const auto space = line.find(' ');
    const std::string found = line.substr(0, space);
    if (found != key) fail("expected key '" + std::string(key) + "', found '" + found + "'");
    return space == std::string::npos ? std::string() : line.substr(space + 1);
}

double BundleReader::get_double(std::string_view key) {
    const std::string v = get(key);
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') fail("bad number '" + v + "' for " + std::string(key));
    return d;
}

std::size_t BundleReader::get_size(std::string_view key) {
    const std::string v = get(key);
    char* end = nullptr;
    const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') fail("bad count '" + v + "' for " + std::string(key));
    return static_cast<std::size_t>(n);
}

Matrix BundleReader::get_matrix(std::string_view name) {
    std::istringstream header(next_line());
    std::string tag, found;
    std::size_t rows = 0, cols = 0;
    header >> tag >> found >> rows >> cols;
    if (tag != "matrix" || found != name) fail("expected matrix '" + std::string(name) + "'");
    std::vector<double> data;
    data.reserve(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto row = parse_csv_line(next_line());
        if (row.size() != cols) fail("matrix '" + std::string(name) + "' row has wrong width");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(rows, cols, std::move(data));
}

std::vector<double> BundleReader::get_vector(std::string_view name) {
    std::istringstream header(next_line());
    std::string tag, found;
    std::size_t len = 0;
    header >> tag >> found >> len;
    if (tag != "vector" || found != name) fail("expected vector '" + std::string(name) + "'");
    auto v = parse_csv_line(next_line());
    if (v.size() != len) fail("vector '" + std::string(name) + "' has wrong length");
    return v;
}

std::vector<double> parse_csv_line(std::string_view line) {
    std::vector<double> out;
    if (line.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        const std::string cell(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                 : comma - start));
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || *end != '\0') throw Error(Errc::Parse, "bad number '" + cell + "'");
        out.push_back(v);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace m2dl
