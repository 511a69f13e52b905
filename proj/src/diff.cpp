#include "forge/diff.hpp"

#include <algorithm>
#include <vector>

#include <fmt/format.h>

namespace forge {

namespace {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

struct Op {
    char kind;  // ' ', '-', '+'
    std::size_t a, b;  // line indices into before/after
};

std::vector<Op> align(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    std::vector<Op> ops;
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j]) {
            ops.push_back({' ', i++, j++});
        } else if (j < m && (i == n || lcs[i][j + 1] > lcs[i + 1][j])) {
            ops.push_back({'+', i, j++});
        } else {
            ops.push_back({'-', i++, j});
        }
    }
    return ops;
}

}  // namespace

std::string unified_diff(std::string_view before, std::string_view after, std::string_view before_label,
                         std::string_view after_label, int context) {
    if (before == after) return {};
    const auto a = split_lines(before);
    const auto b = split_lines(after);
    const auto ops = align(a, b);
    const auto ctx = static_cast<std::size_t>(std::max(0, context));

    std::string out = fmt::format("--- {}\n+++ {}\n", before_label, after_label);
    std::size_t k = 0;
    while (k < ops.size()) {
        // find next change
        std::size_t change = k;
        while (change < ops.size() && ops[change].kind == ' ') ++change;
        if (change == ops.size()) break;
        std::size_t start = change >= ctx ? change - ctx : 0;
        start = std::max(start, k);
        // extend hunk while changes are within 2*ctx of each other
        std::size_t end = change;
        while (true) {
            while (end < ops.size() && ops[end].kind != ' ') ++end;
            std::size_t next = end;
            while (next < ops.size() && ops[next].kind == ' ') ++next;
            if (next < ops.size() && next - end <= 2 * ctx) {
                end = next;
                continue;
            }
            end = std::min(ops.size(), end + ctx);
            break;
        }
        std::size_t a_count = 0, b_count = 0;
        for (std::size_t q = start; q < end; ++q) {
            if (ops[q].kind != '+') ++a_count;
            if (ops[q].kind != '-') ++b_count;
        }
        std::size_t a_start = ops[start].a + (a_count ? 1 : 0);
        std::size_t b_start = ops[start].b + (b_count ? 1 : 0);
        out += fmt::format("@@ -{},{} +{},{} @@\n", a_start, a_count, b_start, b_count);
        for (std::size_t q = start; q < end; ++q) {
            const std::string& line = ops[q].kind == '+' ? b[ops[q].b] : a[ops[q].a];
            out += ops[q].kind;
            out += line;
            out += '\n';
        }
        k = end;
    }
    return out;
}

}  // namespace forge
