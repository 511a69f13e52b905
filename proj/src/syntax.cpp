#include "forge/syntax.hpp"

#include <functional>
#include <set>
#include <unordered_map>

namespace forge {

namespace {

bool is_open(const std::string& t) { return t == "(" || t == "[" || t == "{"; }
bool is_close(const std::string& t) { return t == ")" || t == "]" || t == "}"; }

std::string closer_for(const std::string& open) {
    if (open == "(") return ")";
    if (open == "[") return "]";
    return "}";
}

bool is_assignment(const std::string& t) {
    static const std::set<std::string> ops{"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
                                           "<<=", ">>=", ">>>=", "**=", "//=", "@=", ":="};
    return ops.count(t) != 0;
}

struct ParseFailure {};

class StructureParser {
public:
    StructureParser(const std::vector<Token>& tokens, Language language)
        : t_(tokens), lang_(language) {}

    SyntaxNode parse() {
        SyntaxNode root{"module", {}};
        if (lang_ == Language::python) {
            root.children = python_block(-1);
        } else {
            root.children = brace_block(false);
        }
        if (pos_ != t_.size()) throw ParseFailure{};
        return root;
    }

private:
    const Token& cur() const { return t_[pos_]; }
    bool done() const { return pos_ >= t_.size(); }

    // Kind of the statement whose first token is at `start`.
    std::string statement_kind(std::size_t start, std::size_t end) const {
        const Token& head = t_[start];
        if (head.kind == TokenKind::preprocessor) return "preproc:" + head.text;
        if (head.kind == TokenKind::keyword) return head.text;
        int depth = 0;
        for (std::size_t k = start; k < end; ++k) {
            const auto& s = t_[k].text;
            if (t_[k].kind == TokenKind::string) continue;
            if (is_open(s)) ++depth;
            else if (is_close(s)) --depth;
            else if (depth == 0 && t_[k].kind == TokenKind::op && is_assignment(s)) return "assign";
        }
        if (lang_ != Language::python && end - start >= 2 && t_[start].kind == TokenKind::identifier &&
            (t_[start + 1].kind == TokenKind::identifier || t_[start + 1].text == "<" ||
             t_[start + 1].text == "::"))
            return "decl";
        return "expr";
    }

    // Parses a bracket group starting at pos_ (an opener). Returns its node.
    SyntaxNode group(const std::string& context_before) {
        const std::string open = cur().text;
        const std::string close = closer_for(open);
        std::string label;
        if (open == "(")
            label = (context_before == "identifier" || context_before == "close") ? "call" : "paren";
        else if (open == "[")
            label = (context_before == "identifier" || context_before == "close") ? "subscript" : "list";
        else
            label = "init";
        SyntaxNode node{label, {}};
        ++pos_;
        std::string prev = "open";
        while (!done() && cur().text != close) {
            if (is_close(cur().text) && cur().kind == TokenKind::punct) throw ParseFailure{};
            if (is_open(cur().text) && cur().kind == TokenKind::punct) {
                node.children.push_back(group(prev));
                prev = "close";
                continue;
            }
            if (cur().kind == TokenKind::keyword && (cur().text == "lambda" || cur().text == "for" ||
                                                     cur().text == "if" || cur().text == "new"))
                node.children.push_back({cur().text, {}});
            prev = cur().kind == TokenKind::identifier ? "identifier" : "other";
            ++pos_;
        }
        if (done()) throw ParseFailure{};
        ++pos_;
        return node;
    }

    // --- brace languages

    std::vector<SyntaxNode> brace_block(bool nested) {
        std::vector<SyntaxNode> stmts;
        while (!done()) {
            if (cur().text == "}" && cur().kind == TokenKind::punct) {
                if (!nested) throw ParseFailure{};
                return stmts;
            }
            if (cur().text == ";") {
                ++pos_;
                continue;
            }
            stmts.push_back(brace_statement());
        }
        if (nested) throw ParseFailure{};
        return stmts;
    }

    SyntaxNode brace_statement() {
        const std::size_t start = pos_;
        if (cur().kind == TokenKind::preprocessor) {
            const int line = cur().line;
            SyntaxNode node{"preproc:" + cur().text, {}};
            ++pos_;
            while (!done() && cur().line == line) ++pos_;
            return node;
        }
        SyntaxNode node{"", {}};
        std::string prev = "start";
        while (!done()) {
            const Token& tok = cur();
            if (tok.kind == TokenKind::punct && tok.text == ";") {
                ++pos_;
                break;
            }
            if (tok.kind == TokenKind::punct && tok.text == "}") break;
            if (tok.kind == TokenKind::punct && tok.text == "{") {
                bool initializer = prev == "assign" || prev == "comma" || prev == "open";
                if (initializer) {
                    node.children.push_back(group(prev));
                    prev = "close";
                    continue;
                }
                ++pos_;
                SyntaxNode block{"block", brace_block(true)};
                ++pos_;  // '}'
                node.children.push_back(std::move(block));
                // `} else`, `} while (...)`, `} catch` continue the same statement.
                if (!done() && cur().kind == TokenKind::keyword &&
                    (cur().text == "else" || cur().text == "catch" || cur().text == "finally" ||
                     cur().text == "while")) {
                    node.children.push_back({cur().text, {}});
                    ++pos_;
                    prev = "other";
                    continue;
                }
                if (!done() && cur().text == ";") ++pos_;
                break;
            }
            if (tok.kind == TokenKind::punct && is_close(tok.text)) throw ParseFailure{};
            if (tok.kind == TokenKind::punct && is_open(tok.text)) {
                node.children.push_back(group(prev == "identifier" || prev == "close" ? prev : "other"));
                prev = "close";
                continue;
            }
            if (tok.kind == TokenKind::keyword && pos_ != start &&
                (tok.text == "if" || tok.text == "for" || tok.text == "while" || tok.text == "return" ||
                 tok.text == "new" || tok.text == "else"))
                node.children.push_back({tok.text, {}});
            if (tok.kind == TokenKind::identifier) prev = "identifier";
            else if (tok.kind == TokenKind::op && is_assignment(tok.text)) prev = "assign";
            else if (tok.text == ",") prev = "comma";
            else prev = "other";
            ++pos_;
        }
        node.label = "stmt:" + statement_kind(start, pos_);
        return node;
    }

    // --- python

    // Parses statements at indentation deeper than `parent_indent`.
    std::vector<SyntaxNode> python_block(int parent_indent) {
        std::vector<SyntaxNode> stmts;
        int block_indent = -1;
        while (!done()) {
            const int indent = cur().indent;
            if (indent <= parent_indent) break;
            if (block_indent < 0) block_indent = indent;
            if (indent != block_indent) throw ParseFailure{};  // inconsistent dedent / unexpected indent
            stmts.push_back(python_statement(block_indent));
        }
        return stmts;
    }

    SyntaxNode python_statement(int indent) {
        const std::size_t start = pos_;
        SyntaxNode node{"", {}};
        std::string prev = "start";
        bool header = false;
        while (!done()) {
            const Token& tok = cur();
            if (pos_ != start && tok.line_start) break;
            if (tok.kind == TokenKind::punct && is_close(tok.text)) throw ParseFailure{};
            if (tok.kind == TokenKind::punct && is_open(tok.text)) {
                node.children.push_back(group(prev));
                prev = "close";
                header = false;
                continue;
            }
            if (tok.kind == TokenKind::punct && tok.text == ";") break;
            header = tok.text == ":";
            if (tok.kind == TokenKind::keyword && pos_ != start &&
                (tok.text == "if" || tok.text == "for" || tok.text == "lambda" || tok.text == "else" ||
                 tok.text == "return" || tok.text == "yield"))
                node.children.push_back({tok.text, {}});
            prev = tok.kind == TokenKind::identifier ? "identifier" : "other";
            ++pos_;
        }
        const std::size_t end = pos_;
        if (!done() && cur().text == ";") ++pos_;
        node.label = "stmt:" + statement_kind(start, end);
        if (header) {
            if (!done() && cur().indent > indent) {
                node.children.push_back({"block", python_block(indent)});
            } else if (end == start + 1 || t_[end - 1].line == t_[start].line) {
                // One-line compound statement ("if x: return y") has no block;
                // a header with nothing after it is a syntax error.
                bool body_inline = false;
                for (std::size_t k = start; k + 1 < end; ++k)
                    if (t_[k].text == ":" && k + 1 < end) body_inline = true;
                if (!body_inline && t_[end - 1].text == ":") throw ParseFailure{};
            }
        } else if (!done() && cur().indent > indent && cur().line_start) {
            throw ParseFailure{};  // unexpected indent
        }
        return node;
    }

    const std::vector<Token>& t_;
    Language lang_;
    std::size_t pos_ = 0;
};

std::string signature(const SyntaxNode& node, std::map<std::string, int>& out, bool record) {
    std::string sig = node.label;
    if (!node.children.empty()) {
        sig += "(";
        bool first = true;
        for (const auto& c : node.children) {
            if (!first) sig += ",";
            first = false;
            sig += signature(c, out, true);
        }
        sig += ")";
    }
    if (record) ++out[sig];
    return sig;
}

}  // namespace

std::optional<SyntaxNode> parse_structure(const std::vector<Token>& tokens, Language language) {
    try {
        return StructureParser(tokens, language).parse();
    } catch (const ParseFailure&) {
        return std::nullopt;
    }
}

std::map<std::string, int> subtree_signatures(const SyntaxNode& root) {
    std::map<std::string, int> out;
    signature(root, out, false);
    return out;
}

std::vector<std::string> dataflow_edges(const std::vector<Token>& tokens, Language language) {
    // Split into simple statements, tolerant of unbalanced brackets.
    std::vector<std::vector<const Token*>> pieces(1);
    int depth = 0;
    for (const auto& tok : tokens) {
        const bool bracket = tok.kind == TokenKind::punct;
        if (language == Language::python) {
            if (tok.line_start && depth == 0 && !pieces.back().empty()) pieces.emplace_back();
            if (bracket && is_open(tok.text)) ++depth;
            if (bracket && is_close(tok.text)) depth = std::max(0, depth - 1);
            if (tok.text == ";" && depth == 0) {
                pieces.emplace_back();
                continue;
            }
            pieces.back().push_back(&tok);
        } else {
            if (bracket && (tok.text == ";" || tok.text == "{" || tok.text == "}")) {
                pieces.emplace_back();
                continue;
            }
            if (tok.kind == TokenKind::preprocessor) {
                pieces.emplace_back();
                continue;
            }
            pieces.back().push_back(&tok);
        }
    }

    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> raw;
    auto identifiers = [](const std::vector<const Token*>& part, std::size_t from, std::size_t to) {
        std::vector<std::string> out;
        for (std::size_t k = from; k < to; ++k) {
            const Token* tok = part[k];
            if (tok->kind != TokenKind::identifier) continue;
            bool called = k + 1 < to && part[k + 1]->text == "(";
            bool member = k > from && (part[k - 1]->text == "." || part[k - 1]->text == "->" ||
                                       part[k - 1]->text == "::");
            if (!called && !member) out.push_back(tok->text);
        }
        return out;
    };
    auto target_of = [&](const std::vector<const Token*>& part, std::size_t from, std::size_t to) {
        // Comma-separated targets; each is its first identifier when it is a
        // member/subscript expression, otherwise its last identifier.
        std::vector<std::string> targets;
        std::size_t seg = from;
        int d = 0;
        for (std::size_t k = from; k <= to; ++k) {
            bool end = k == to;
            if (!end) {
                const auto& s = part[k]->text;
                if (is_open(s)) ++d;
                if (is_close(s)) --d;
                end = s == "," && d == 0;
            }
            if (!end) continue;
            bool compound = false;
            std::string first, last;
            for (std::size_t q = seg; q < k; ++q) {
                const auto& s = part[q]->text;
                if (s == "." || s == "[" || s == "->") compound = true;
                if (part[q]->kind == TokenKind::identifier) {
                    if (first.empty()) first = s;
                    if (!compound) last = s;
                }
            }
            std::string chosen = compound ? first : last;
            if (!chosen.empty()) targets.push_back(chosen);
            seg = k + 1;
        }
        return targets;
    };

    for (const auto& part : pieces) {
        if (part.empty()) continue;
        // for-each forms
        if (part.front()->text == "for") {
            std::size_t split = 0;
            for (std::size_t k = 1; k < part.size(); ++k)
                if ((language == Language::python && part[k]->text == "in") ||
                    (language != Language::python && part[k]->text == ":")) {
                    split = k;
                    break;
                }
            if (split) {
                std::size_t from = 1;
                if (language != Language::python && part.size() > 1 && part[1]->text == "(") from = 2;
                std::size_t to = part.size();
                if (language == Language::python && part.back()->text == ":") --to;
                raw.emplace_back(target_of(part, from, split), identifiers(part, split + 1, to));
                continue;
            }
        }
        int d = 0;
        std::size_t op = part.size();
        for (std::size_t k = 0; k < part.size(); ++k) {
            const auto& s = part[k]->text;
            if (part[k]->kind == TokenKind::punct && is_open(s)) ++d;
            if (part[k]->kind == TokenKind::punct && is_close(s)) --d;
            if (part[k]->kind == TokenKind::op && is_assignment(s) && s != ":=") {
                // A C-style for header "for ( int i = 0" sits at depth 1.
                if (d == 0 || (d == 1 && part.front()->text == "for")) {
                    op = k;
                    break;
                }
            }
        }
        if (op == part.size()) continue;
        std::size_t lhs_from = 0;
        if (part.front()->text == "for") lhs_from = part.size() > 1 && part[1]->text == "(" ? 2 : 1;
        auto targets = target_of(part, lhs_from, op);
        auto sources = identifiers(part, op + 1, part.size());
        if (part[op]->text != "=")
            for (const auto& t : targets) sources.insert(sources.begin(), t);
        raw.emplace_back(std::move(targets), std::move(sources));
    }

    std::unordered_map<std::string, std::string> names;
    auto norm = [&](const std::string& v) {
        auto [it, inserted] = names.emplace(v, "var_" + std::to_string(names.size()));
        return it->second;
    };
    std::vector<std::string> edges;
    for (const auto& [targets, sources] : raw) {
        for (const auto& t : targets) {
            std::string nt = norm(t);
            if (sources.empty()) {
                edges.push_back(nt + "<-");
                continue;
            }
            for (const auto& s : sources) edges.push_back(nt + "<-" + norm(s));
        }
    }
    return edges;
}

}  // namespace forge
