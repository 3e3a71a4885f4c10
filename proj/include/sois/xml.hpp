#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sois::xml {

struct Error : std::runtime_error {
    Error(const std::string& what, int line, int col)
        : std::runtime_error(what + " (line " + std::to_string(line) + ", col " + std::to_string(col) + ")"),
          line(line), col(col) {}
    int line;
    int col;
};

struct Attr {
    std::string name;
    std::string value;
    int line = 0;
    int col = 0;
};

struct Node {
    std::string name;
    std::vector<Attr> attrs;
    std::vector<Node> children;
    int line = 0;
    int col = 0;

    const Attr* find_attr(std::string_view attr_name) const {
        for (const auto& a : attrs)
            if (a.name == attr_name) return &a;
        return nullptr;
    }
};

// Parses the XML subset used by group-role specification files: one root
// element, nested elements, attributes, self-closing tags, comments, an
// optional declaration, and the five standard entities. No namespaces,
// CDATA, DTDs, or processing instructions. Non-whitespace text content is
// rejected. Throws xml::Error with 1-based line/column on any violation.
Node parse(std::string_view text);

std::string escape(std::string_view raw);

} // namespace sois::xml
