#pragma once

#include <stdexcept>
#include <string>

namespace segtrain {

/// Malformed or inconsistent input data (files, corpora, selections).
class DataError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line usage.
class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// A parse failure that knows which input line triggered it.
class ParseError : public DataError {
   public:
    ParseError(std::string const &source, std::size_t line, std::string const &what)
        : DataError(source + ":" + std::to_string(line) + ": " + what), m_line(line)
    {
    }

    [[nodiscard]] std::size_t line() const noexcept { return m_line; }

   private:
    std::size_t m_line;
};

} // namespace segtrain
