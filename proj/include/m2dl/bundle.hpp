#pragma once

#include "m2dl/tensor.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace m2dl {

// Line-oriented text bundle used for model checkpoints:
//
//   <magic> <version>
//   key value...
//   matrix <name> <rows> <cols>      followed by <rows> CSV lines
//   vector <name> <len>              followed by one CSV line (empty when len = 0)
//
// Numbers are written with %.17g, so reading back is bit-exact.
class BundleWriter {
public:
    BundleWriter(std::ostream& out, std::string_view magic, int version);

    void put(std::string_view key, std::string_view value);
    void put(std::string_view key, double value);
    void put(std::string_view key, std::size_t value);
    void put_matrix(std::string_view name, const Matrix& m);
    void put_vector(std::string_view name, const std::vector<double>& v);

private:
    std::ostream& out_;
};

class BundleReader {
public:
    // Throws Errc::Parse when the magic does not match or the version is newer.
    BundleReader(std::istream& in, std::string_view magic, int max_version);

    int version() const noexcept { return version_; }

    std::string get(std::string_view key);
    double get_double(std::string_view key);
    std::size_t get_size(std::string_view key);
    Matrix get_matrix(std::string_view name);
    std::vector<double> get_vector(std::string_view name);

private:
    std::string next_line();
    [[noreturn]] void fail(const std::string& msg) const;

    std::istream& in_;
    std::size_t lineno_ = 0;
    int version_ = 0;
};

std::vector<double> parse_csv_line(std::string_view line);

}  // namespace m2dl
