#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace wganplan {

/// Shortest round-trip decimal form of a double (locale-independent).
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Whitespace-separated token reader that tracks line numbers and a field
/// label so malformed records can be reported precisely.
class TokenReader {
  public:
    explicit TokenReader(std::string_view text, std::string name = "input")
        : text_(text), name_(std::move(name)) {}

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    std::string_view next_token(std::string_view field) {
        skip_ws();
        if (pos_ >= text_.size())
            fail(field, "unexpected end of input");
        std::size_t start = pos_;
        while (pos_ < text_.size() && !is_ws(text_[pos_])) ++pos_;
        return text_.substr(start, pos_ - start);
    }

    double next_double(std::string_view field) {
        std::string_view tok = next_token(field);
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            fail(field, "expected a real number, got '" + std::string(tok) + "'");
        return v;
    }

    long long next_int(std::string_view field) {
        std::string_view tok = next_token(field);
        long long v = 0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            fail(field, "expected an integer, got '" + std::string(tok) + "'");
        return v;
    }

    void expect(std::string_view literal, std::string_view field) {
        std::string_view tok = next_token(field);
        if (tok != literal)
            fail(field, "expected '" + std::string(literal) + "', got '" + std::string(tok) + "'");
    }

    std::size_t line() const { return line_; }

    [[noreturn]] void fail(std::string_view field, const std::string& what) const {
        throw ParseError(name_ + ":" + std::to_string(line_) + ": field '" +
                         std::string(field) + "': " + what);
    }

  private:
    static bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

    void skip_ws() {
        while (pos_ < text_.size() && is_ws(text_[pos_])) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string_view text_;
    std::string name_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

}  // namespace wganplan
