#include "entroflow/toml_reader.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "entroflow/error.hpp"

namespace entroflow {

namespace {

using Json = nlohmann::ordered_json;

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    Json run() {
        Json root = Json::object();
        Json* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                table = header(root);
            } else {
                key_value(*table);
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        std::string msg = "TOML line " + std::to_string(line_) + ": " + what;
        if (!key_.empty()) msg += " (key '" + key_ + "')";
        throw ConfigError(msg);
    }

    bool eof() const { return pos_ >= s_.size(); }
    char peek(std::size_t ahead = 0) const { return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0'; }
    char get() {
        char c = s_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') ++pos_;
        }
    }
    void skip_blank_lines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\r') ++pos_;
            if (peek() == '\n') {
                get();
            } else {
                break;
            }
        }
    }
    // Whitespace, comments and newlines inside arrays.
    void skip_array_space() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r') {
                get();
            } else {
                break;
            }
        }
    }
    void end_of_line() {
        skip_ws();
        skip_comment();
        if (peek() == '\r') ++pos_;
        if (eof()) return;
        if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "'");
        get();
        key_.clear();
    }

    static bool bare_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    }

    std::string key_part() {
        skip_ws();
        if (peek() == '"') return basic_string();
        if (peek() == '\'') return literal_string();
        std::string out;
        while (!eof() && bare_char(peek())) out += get();
        if (out.empty()) fail("expected a key");
        return out;
    }

    std::vector<std::string> dotted_key() {
        std::vector<std::string> parts{key_part()};
        skip_ws();
        while (peek() == '.') {
            ++pos_;
            parts.push_back(key_part());
            skip_ws();
        }
        return parts;
    }

    static std::string join(const std::vector<std::string>& parts) {
        std::string out;
        for (const auto& p : parts) {
            if (!out.empty()) out += '.';
            out += p;
        }
        return out;
    }

    Json* descend(Json& from, const std::vector<std::string>& parts, std::size_t count) {
        Json* cur = &from;
        for (std::size_t i = 0; i < count; ++i) {
            Json& next = (*cur)[parts[i]];
            if (next.is_null()) next = Json::object();
            if (next.is_array() && !next.empty() && next.back().is_object()) {
                cur = &next.back();
            } else if (next.is_object()) {
                cur = &next;
            } else {
                fail("'" + parts[i] + "' is not a table");
            }
        }
        return cur;
    }

    Json* header(Json& root) {
        ++pos_;
        const bool array = peek() == '[';
        if (array) ++pos_;
        auto parts = dotted_key();
        key_ = join(parts);
        if (peek() != ']') fail("expected ']'");
        ++pos_;
        if (array) {
            if (peek() != ']') fail("expected ']]'");
            ++pos_;
        }
        Json* parent = descend(root, parts, parts.size() - 1);
        Json& slot = (*parent)[parts.back()];
        if (array) {
            if (slot.is_null()) slot = Json::array();
            if (!slot.is_array()) fail("redefinition of '" + key_ + "'");
            slot.push_back(Json::object());
            return &slot.back();
        }
        if (slot.is_null()) {
            slot = Json::object();
        } else if (!slot.is_object() || defined_tables_.count(key_) != 0) {
            fail("duplicate table '" + key_ + "'");
        }
        defined_tables_.insert(key_);
        return &slot;
    }

    void key_value(Json& table) {
        auto parts = dotted_key();
        key_ = join(parts);
        skip_ws();
        if (peek() != '=') fail("expected '=' after key");
        ++pos_;
        skip_ws();
        Json value = parse_value();
        Json* parent = descend(table, parts, parts.size() - 1);
        if (parent->contains(parts.back())) fail("duplicate key");
        (*parent)[parts.back()] = std::move(value);
    }

    Json parse_value() {
        skip_ws();
        const char c = peek();
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') return array();
        if (c == '{') return inline_table();
        if (s_.substr(pos_, 4) == "true" && !bare_char(peek(4))) {
            pos_ += 4;
            return true;
        }
        if (s_.substr(pos_, 5) == "false" && !bare_char(peek(5))) {
            pos_ += 5;
            return false;
        }
        return number();
    }

    Json number() {
        std::string tok;
        while (!eof()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' || c == '_') {
                if (c != '_') tok += c;
                ++pos_;
            } else {
                break;
            }
        }
        if (tok.empty()) fail("expected a value");
        std::string body = tok;
        double sign = 1.0;
        if (body[0] == '+' || body[0] == '-') {
            if (body[0] == '-') sign = -1.0;
            body.erase(0, 1);
        }
        if (body == "inf") return sign * std::numeric_limits<double>::infinity();
        if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
        const bool is_float = body.find_first_of(".eE") != std::string::npos;
        if (body.empty() || !std::isdigit(static_cast<unsigned char>(body[0]))) fail("invalid value '" + tok + "'");
        try {
            std::size_t used = 0;
            if (is_float) {
                const double v = std::stod(tok, &used);
                if (used != tok.size()) fail("invalid number '" + tok + "'");
                return v;
            }
            const long long v = std::stoll(tok, &used, 10);
            if (used != tok.size()) fail("invalid integer '" + tok + "'");
            return v;
        } catch (const std::logic_error&) {
            fail("invalid number '" + tok + "'");
        }
    }

    std::string basic_string() {
        ++pos_;
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("unterminated string");
            c = get();
            switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(std::string("unsupported escape '\\") + c + "'");
            }
        }
    }

    std::string literal_string() {
        ++pos_;
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = get();
            if (c == '\'') return out;
            out += c;
        }
    }

    Json array() {
        ++pos_;
        Json out = Json::array();
        while (true) {
            skip_array_space();
            if (peek() == ']') {
                ++pos_;
                return out;
            }
            out.push_back(parse_value());
            skip_array_space();
            if (peek() == ',') {
                ++pos_;
            } else if (peek() != ']') {
                fail("expected ',' or ']' in array");
            }
        }
    }

    Json inline_table() {
        ++pos_;
        Json out = Json::object();
        const std::string outer = key_;
        skip_ws();
        if (peek() == '}') {
            ++pos_;
            return out;
        }
        while (true) {
            auto parts = dotted_key();
            key_ = outer.empty() ? join(parts) : outer + "." + join(parts);
            skip_ws();
            if (peek() != '=') fail("expected '=' in inline table");
            ++pos_;
            Json value = parse_value();
            Json* parent = descend(out, parts, parts.size() - 1);
            if (parent->contains(parts.back())) fail("duplicate key");
            (*parent)[parts.back()] = std::move(value);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                skip_ws();
            } else if (peek() == '}') {
                ++pos_;
                key_ = outer;
                return out;
            } else {
                fail("expected ',' or '}' in inline table");
            }
        }
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::string key_;
    std::set<std::string> defined_tables_;
};

}  // namespace

nlohmann::ordered_json parse_toml(std::string_view text) { return Parser(text).run(); }

}  // namespace entroflow
