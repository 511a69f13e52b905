#include "forge/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

namespace forge {

namespace {

const std::unordered_set<std::string_view>& keywords(Language language) {
    static const std::unordered_set<std::string_view> python{
        "False", "None", "True", "and", "as", "assert", "async", "await", "break",
        "class", "continue", "def", "del", "elif", "else", "except", "finally", "for",
        "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or",
        "pass", "raise", "return", "try", "while", "with", "yield", "match", "case"};
    static const std::unordered_set<std::string_view> cpp{
        "alignas", "alignof", "auto", "bool", "break", "case", "catch", "char", "class",
        "const", "constexpr", "const_cast", "continue", "decltype", "default", "delete",
        "do", "double", "dynamic_cast", "else", "enum", "explicit", "extern", "false",
        "float", "for", "friend", "goto", "if", "inline", "int", "long", "mutable",
        "namespace", "new", "noexcept", "nullptr", "operator", "private", "protected",
        "public", "register", "reinterpret_cast", "return", "short", "signed", "sizeof",
        "static", "static_assert", "static_cast", "struct", "switch", "template", "this",
        "throw", "true", "try", "typedef", "typename", "union", "unsigned", "using",
        "virtual", "void", "volatile", "while", "concept", "requires", "co_await",
        "co_return", "co_yield", "consteval", "constinit", "char8_t", "char16_t", "char32_t"};
    static const std::unordered_set<std::string_view> java{
        "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class",
        "const", "continue", "default", "do", "double", "else", "enum", "extends", "final",
        "finally", "float", "for", "goto", "if", "implements", "import", "instanceof", "int",
        "interface", "long", "native", "new", "package", "private", "protected", "public",
        "return", "short", "static", "strictfp", "super", "switch", "synchronized", "this",
        "throw", "throws", "transient", "try", "void", "volatile", "while", "var", "record",
        "yield", "true", "false", "null"};
    switch (language) {
        case Language::python: return python;
        case Language::cpp: return cpp;
        case Language::java: return java;
    }
    return python;
}

// Longest first.
constexpr std::array<std::string_view, 52> kOperators{
    ">>>=", "<<=", ">>=", ">>>", "**=", "//=", "...", "->*", "<=>", "::", "->", "++", "--",
    "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "@=", "<<", ">>", "**", "//", ":=", ".*", "+", "-", "*", "/", "%", "&", "|", "^",
    "~", "!", "=", "<", ">", "?", "@", ":", ".", "$"};

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

class Lexer {
public:
    Lexer(std::string_view code, Language language) : s_(code), lang_(language) {}

    std::vector<Token> run() {
        while (i_ < s_.size()) {
            unsigned char c = s_[i_];
            if (c == '\n') {
                ++line_;
                ++i_;
                at_line_start_ = true;
                col_ = 0;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                if (at_line_start_) col_ += c == '\t' ? 8 - (col_ % 8) : 1;
                ++i_;
                continue;
            }
            if (lang_ == Language::python && c == '\\' && peek(1) == '\n') {
                i_ += 2;
                ++line_;
                continue;
            }
            if (comment()) continue;
            const std::size_t start = i_;
            token_line_ = line_;
            TokenKind kind;
            if (lang_ == Language::cpp && c == '#' && at_line_start_) {
                preprocessor();
                continue;
            } else if (string_literal(kind)) {
            } else if (ident_start(c)) {
                while (i_ < s_.size() && ident_char(s_[i_])) ++i_;
                // Python string prefixes (r"", b'', f"", rb"" ...) and C++ encoding prefixes.
                if (i_ < s_.size() && (s_[i_] == '"' || s_[i_] == '\'') && is_prefix(s_.substr(start, i_ - start))) {
                    i_ = start;
                    prefixed_string(kind);
                } else {
                    kind = keywords(lang_).count(s_.substr(start, i_ - start)) ? TokenKind::keyword
                                                                              : TokenKind::identifier;
                }
            } else if (std::isdigit(c) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                number();
                kind = TokenKind::number;
            } else if (auto op = match_operator()) {
                i_ += op;
                kind = TokenKind::op;
            } else if (std::string_view("()[]{},;").find(static_cast<char>(c)) != std::string_view::npos) {
                ++i_;
                kind = TokenKind::punct;
            } else {
                ++i_;
                kind = TokenKind::error;
            }
            emit(start, kind);
        }
        return std::move(out_);
    }

private:
    char peek(std::size_t k) const { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; }

    void emit(std::size_t start, TokenKind kind) {
        Token t;
        t.text = std::string(s_.substr(start, i_ - start));
        t.kind = kind;
        t.line = token_line_;
        t.indent = col_;
        t.line_start = at_line_start_;
        at_line_start_ = false;
        out_.push_back(std::move(t));
    }

    bool comment() {
        if (lang_ == Language::python) {
            if (s_[i_] != '#') return false;
            while (i_ < s_.size() && s_[i_] != '\n') ++i_;
            return true;
        }
        if (s_[i_] == '/' && peek(1) == '/') {
            while (i_ < s_.size() && s_[i_] != '\n') {
                if (s_[i_] == '\\' && peek(1) == '\n') {
                    ++line_;
                    ++i_;
                }
                ++i_;
            }
            return true;
        }
        if (s_[i_] == '/' && peek(1) == '*') {
            i_ += 2;
            while (i_ < s_.size() && !(s_[i_] == '*' && peek(1) == '/')) {
                if (s_[i_] == '\n') ++line_;
                ++i_;
            }
            i_ = std::min(s_.size(), i_ + 2);
            return true;
        }
        return false;
    }

    void preprocessor() {
        // Directive name and its arguments become ordinary tokens; the '#' is
        // kept as a preprocessor marker so statement structure can see it.
        token_line_ = line_;
        std::size_t start = i_++;
        while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
        while (i_ < s_.size() && ident_char(s_[i_])) ++i_;
        Token t;
        std::string text(s_.substr(start, i_ - start));
        text.erase(std::remove_if(text.begin(), text.end(), [](char ch) { return ch == ' ' || ch == '\t'; }),
                   text.end());
        t.text = text;
        t.kind = TokenKind::preprocessor;
        t.line = line_;
        t.indent = col_;
        t.line_start = true;
        at_line_start_ = false;
        out_.push_back(std::move(t));
        // #include <path> keeps the header name together.
        while (i_ < s_.size() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
        if (text == "#include" && i_ < s_.size() && s_[i_] == '<') {
            std::size_t h = i_;
            while (i_ < s_.size() && s_[i_] != '>' && s_[i_] != '\n') ++i_;
            if (i_ < s_.size() && s_[i_] == '>') ++i_;
            emit(h, TokenKind::string);
        }
    }

    bool is_prefix(std::string_view p) const {
        std::string lower;
        for (char ch : p) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (lang_ == Language::python)
            return lower == "r" || lower == "b" || lower == "f" || lower == "u" || lower == "rb" ||
                   lower == "br" || lower == "fr" || lower == "rf";
        if (lang_ == Language::cpp)
            return p == "L" || p == "u" || p == "U" || p == "u8" || p == "R" || p == "LR" ||
                   p == "uR" || p == "UR" || p == "u8R";
        return false;
    }

    void prefixed_string(TokenKind& kind) {
        std::size_t p = i_;
        while (i_ < s_.size() && ident_char(s_[i_])) ++i_;
        std::string_view prefix = s_.substr(p, i_ - p);
        if (lang_ == Language::cpp && !prefix.empty() && prefix.back() == 'R' && s_[i_] == '"') {
            raw_cpp_string();
            kind = TokenKind::string;
            return;
        }
        string_literal(kind);
    }

    void raw_cpp_string() {
        // R"delim( ... )delim"
        std::size_t open = s_.find('(', i_);
        if (open == std::string_view::npos) {
            to_line_end();
            return;
        }
        std::string closing = ")" + std::string(s_.substr(i_ + 1, open - i_ - 1)) + "\"";
        std::size_t end = s_.find(closing, open);
        std::size_t stop = end == std::string_view::npos ? s_.size() : end + closing.size();
        for (std::size_t k = i_; k < stop; ++k)
            if (s_[k] == '\n') ++line_;
        i_ = stop;
    }

    void to_line_end() {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
    }

    bool string_literal(TokenKind& kind) {
        char q = s_[i_];
        if (q != '"' && q != '\'') return false;
        kind = TokenKind::string;
        if (lang_ == Language::python && peek(1) == q && peek(2) == q) {
            std::string delim(3, q);
            std::size_t end = s_.find(delim, i_ + 3);
            while (end != std::string_view::npos && backslashes_before(end) % 2 == 1)
                end = s_.find(delim, end + 1);
            std::size_t stop = end == std::string_view::npos ? s_.size() : end + 3;
            if (end == std::string_view::npos) kind = TokenKind::error;
            for (std::size_t k = i_; k < stop; ++k)
                if (s_[k] == '\n') ++line_;
            i_ = stop;
            return true;
        }
        ++i_;
        while (i_ < s_.size()) {
            char ch = s_[i_];
            if (ch == '\\' && i_ + 1 < s_.size()) {
                if (s_[i_ + 1] == '\n') ++line_;
                i_ += 2;
                continue;
            }
            if (ch == '\n') {
                kind = TokenKind::error;
                return true;
            }
            ++i_;
            if (ch == q) return true;
        }
        kind = TokenKind::error;
        return true;
    }

    std::size_t backslashes_before(std::size_t pos) const {
        std::size_t n = 0;
        while (pos > n && s_[pos - n - 1] == '\\') ++n;
        return n;
    }

    void number() {
        while (i_ < s_.size()) {
            unsigned char ch = s_[i_];
            if (std::isalnum(ch) || ch == '_' || ch == '.') {
                bool exponent = (ch == 'e' || ch == 'E' || ch == 'p' || ch == 'P');
                ++i_;
                if (exponent && (peek(0) == '+' || peek(0) == '-')) ++i_;
            } else if (ch == '\'' && lang_ == Language::cpp && std::isalnum(static_cast<unsigned char>(peek(1)))) {
                ++i_;
            } else {
                break;
            }
        }
    }

    std::size_t match_operator() const {
        for (auto op : kOperators)
            if (s_.substr(i_, op.size()) == op) return op.size();
        return 0;
    }

    std::string_view s_;
    Language lang_;
    std::size_t i_ = 0;
    int line_ = 1;
    int token_line_ = 1;
    int col_ = 0;
    bool at_line_start_ = true;
    std::vector<Token> out_;
};

}  // namespace

bool is_keyword(std::string_view word, Language language) {
    return keywords(language).count(word) != 0;
}

std::vector<Token> lex_tokens(std::string_view code, Language language) {
    return Lexer(code, language).run();
}

TokenSeq lex(std::string_view code, Language language) {
    TokenSeq seq;
    seq.language = language;
    for (auto& t : lex_tokens(code, language)) seq.tokens.push_back(std::move(t.text));
    return seq;
}

std::string rejoin(const TokenSeq& seq) {
    std::string out;
    for (const auto& t : seq.tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

}  // namespace forge
