#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "forge/domain.hpp"

namespace forge {

enum class TokenKind { identifier, keyword, number, string, op, punct, preprocessor, error };

struct Token {
    std::string text;
    TokenKind kind = TokenKind::identifier;
    int line = 1;     // 1-based
    int indent = 0;   // leading columns of the token's line
    bool line_start = false;  // first token on its physical line
};

// Token texts only: no comments, no whitespace.
struct TokenSeq {
    std::vector<std::string> tokens;
    Language language = Language::python;

    std::size_t size() const noexcept { return tokens.size(); }
    bool operator==(const TokenSeq& other) const { return tokens == other.tokens; }
};

// Deterministic, never-failing lexer for the supported languages. String and
// character literals are single tokens; unterminated literals become error
// tokens running to end of line.
std::vector<Token> lex_tokens(std::string_view code, Language language);
TokenSeq lex(std::string_view code, Language language);

// Tokens joined by single spaces.
std::string rejoin(const TokenSeq& seq);

bool is_keyword(std::string_view word, Language language);

}  // namespace forge
