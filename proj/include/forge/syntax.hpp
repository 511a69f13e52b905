#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "forge/lexer.hpp"

namespace forge {

// Coarse statement/group structure recovered from tokens. Labels carry node
// kinds only (statement kind, call, paren, subscript, block...); identifiers
// and literals are leaves and do not appear.
struct SyntaxNode {
    std::string label;
    std::vector<SyntaxNode> children;
};

// Statement tree of a program, or nullopt when brackets do not balance or
// (Python) indentation is inconsistent.
std::optional<SyntaxNode> parse_structure(const std::vector<Token>& tokens, Language language);

// Multiset of subtree signatures, one per non-root node.
std::map<std::string, int> subtree_signatures(const SyntaxNode& root);

// Def-use edges "target<-source" over identifiers, with variable names
// replaced by var_0, var_1, ... in order of first appearance. Assignments
// from literals yield "target<-".
std::vector<std::string> dataflow_edges(const std::vector<Token>& tokens, Language language);

}  // namespace forge
