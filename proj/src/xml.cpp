#include "sois/xml.hpp"

#include <cctype>

namespace sois::xml {

namespace {

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;
    int line = 1;
    int col = 1;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    char advance() {
        char c = text[pos++];
        if (c == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        return c;
    }

    bool starts_with(std::string_view s) const { return text.substr(pos, s.size()) == s; }

    void skip(std::size_t n) {
        for (std::size_t i = 0; i < n && !eof(); ++i) advance();
    }

    [[noreturn]] void fail(const std::string& msg) const { throw Error(msg, line, col); }
};

bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
}

bool is_name_char(char c) {
    return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.';
}

void skip_ws(Cursor& c) {
    while (!c.eof() && std::isspace(static_cast<unsigned char>(c.peek()))) c.advance();
}

void skip_misc(Cursor& c) {
    // whitespace, comments, and the declaration between markup
    for (;;) {
        skip_ws(c);
        if (c.starts_with("<!--")) {
            int line = c.line, col = c.col;
            c.skip(4);
            for (;;) {
                if (c.eof()) throw Error("unterminated comment", line, col);
                if (c.starts_with("-->")) {
                    c.skip(3);
                    break;
                }
                c.advance();
            }
            continue;
        }
        if (c.starts_with("<?")) {
            int line = c.line, col = c.col;
            c.skip(2);
            for (;;) {
                if (c.eof()) throw Error("unterminated declaration", line, col);
                if (c.starts_with("?>")) {
                    c.skip(2);
                    break;
                }
                c.advance();
            }
            continue;
        }
        return;
    }
}

std::string parse_name(Cursor& c) {
    if (c.eof() || !is_name_start(c.peek())) c.fail("expected a name");
    std::string out;
    while (!c.eof() && is_name_char(c.peek())) out.push_back(c.advance());
    return out;
}

std::string decode_entities(Cursor& c, char quote) {
    std::string out;
    for (;;) {
        if (c.eof()) c.fail("unterminated attribute value");
        char ch = c.peek();
        if (ch == quote) break;
        if (ch == '<') c.fail("'<' not allowed in attribute value");
        if (ch == '&') {
            int line = c.line, col = c.col;
            c.advance();
            std::string ent;
            while (!c.eof() && c.peek() != ';' && ent.size() < 8) ent.push_back(c.advance());
            if (c.eof() || c.peek() != ';') throw Error("malformed entity", line, col);
            c.advance();
            if (ent == "amp") out.push_back('&');
            else if (ent == "lt") out.push_back('<');
            else if (ent == "gt") out.push_back('>');
            else if (ent == "quot") out.push_back('"');
            else if (ent == "apos") out.push_back('\'');
            else throw Error("unknown entity '&" + ent + ";'", line, col);
            continue;
        }
        out.push_back(c.advance());
    }
    return out;
}

Node parse_element(Cursor& c);

void parse_children(Cursor& c, Node& parent) {
    for (;;) {
        skip_misc(c);
        if (c.eof()) c.fail("unexpected end of document inside <" + parent.name + ">");
        if (c.starts_with("</")) {
            int line = c.line, col = c.col;
            c.skip(2);
            std::string name = parse_name(c);
            skip_ws(c);
            if (c.eof() || c.peek() != '>') c.fail("expected '>' in closing tag");
            c.advance();
            if (name != parent.name)
                throw Error("mismatched closing tag </" + name + ">, expected </" + parent.name + ">", line, col);
            return;
        }
        if (c.peek() == '<') {
            parent.children.push_back(parse_element(c));
            continue;
        }
        c.fail("unexpected text content inside <" + parent.name + ">");
    }
}

Node parse_element(Cursor& c) {
    Node node;
    node.line = c.line;
    node.col = c.col;
    if (c.eof() || c.peek() != '<') c.fail("expected '<'");
    c.advance();
    node.name = parse_name(c);

    for (;;) {
        skip_ws(c);
        if (c.eof()) c.fail("unterminated start tag <" + node.name + ">");
        if (c.starts_with("/>")) {
            c.skip(2);
            return node;
        }
        if (c.peek() == '>') {
            c.advance();
            parse_children(c, node);
            return node;
        }
        Attr attr;
        attr.line = c.line;
        attr.col = c.col;
        attr.name = parse_name(c);
        skip_ws(c);
        if (c.eof() || c.peek() != '=') c.fail("expected '=' after attribute '" + attr.name + "'");
        c.advance();
        skip_ws(c);
        if (c.eof() || (c.peek() != '"' && c.peek() != '\'')) c.fail("expected quoted attribute value");
        char quote = c.advance();
        attr.value = decode_entities(c, quote);
        c.advance(); // closing quote
        for (const auto& existing : node.attrs)
            if (existing.name == attr.name)
                throw Error("duplicate attribute '" + attr.name + "'", attr.line, attr.col);
        node.attrs.push_back(std::move(attr));
    }
}

} // namespace

Node parse(std::string_view text) {
    Cursor c{text};
    skip_misc(c);
    if (c.eof()) c.fail("empty document");
    if (c.peek() != '<') c.fail("expected root element");
    Node root = parse_element(c);
    skip_misc(c);
    if (!c.eof()) c.fail("trailing content after root element");
    return root;
}

std::string escape(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char ch : raw) {
        switch (ch) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out.push_back(ch);
        }
    }
    return out;
}

} // namespace sois::xml
