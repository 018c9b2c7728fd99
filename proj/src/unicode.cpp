#include "opensetiq/unicode.hpp"

#include <array>

namespace osiq::unicode {

std::vector<char32_t> decode_utf8(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
    while (i < text.size()) {
        const unsigned char b0 = byte(i);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int len = 0;
        char32_t cp = 0;
        if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + len > text.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const unsigned char bk = byte(i + k);
            if ((bk & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        // reject overlong forms and surrogates
        if (!ok || (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
            (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
            (cp >= 0xD800 && cp <= 0xDFFF)) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(std::span<const char32_t> points) {
    std::string out;
    out.reserve(points.size());
    for (char32_t cp : points) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

bool is_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp == 0x178) return 0xFF;  // Y with diaeresis
    return cp;
}

namespace {

struct Composition {
    char32_t base;
    char32_t mark;
    char32_t composed;
};

// Latin-1 precomposed letters, keyed by (base, combining mark).
// Marks: 0300 grave, 0301 acute, 0302 circumflex, 0303 tilde,
// 0308 diaeresis, 030A ring above, 0327 cedilla.
constexpr std::array<Composition, 54> kCompositions{{
    {U'A', 0x300, 0xC0}, {U'A', 0x301, 0xC1}, {U'A', 0x302, 0xC2},
    {U'A', 0x303, 0xC3}, {U'A', 0x308, 0xC4}, {U'A', 0x30A, 0xC5},
    {U'C', 0x327, 0xC7},
    {U'E', 0x300, 0xC8}, {U'E', 0x301, 0xC9}, {U'E', 0x302, 0xCA}, {U'E', 0x308, 0xCB},
    {U'I', 0x300, 0xCC}, {U'I', 0x301, 0xCD}, {U'I', 0x302, 0xCE}, {U'I', 0x308, 0xCF},
    {U'N', 0x303, 0xD1},
    {U'O', 0x300, 0xD2}, {U'O', 0x301, 0xD3}, {U'O', 0x302, 0xD4},
    {U'O', 0x303, 0xD5}, {U'O', 0x308, 0xD6},
    {U'U', 0x300, 0xD9}, {U'U', 0x301, 0xDA}, {U'U', 0x302, 0xDB}, {U'U', 0x308, 0xDC},
    {U'Y', 0x301, 0xDD}, {U'Y', 0x308, 0x178},
    {U'a', 0x300, 0xE0}, {U'a', 0x301, 0xE1}, {U'a', 0x302, 0xE2},
    {U'a', 0x303, 0xE3}, {U'a', 0x308, 0xE4}, {U'a', 0x30A, 0xE5},
    {U'c', 0x327, 0xE7},
    {U'e', 0x300, 0xE8}, {U'e', 0x301, 0xE9}, {U'e', 0x302, 0xEA}, {U'e', 0x308, 0xEB},
    {U'i', 0x300, 0xEC}, {U'i', 0x301, 0xED}, {U'i', 0x302, 0xEE}, {U'i', 0x308, 0xEF},
    {U'n', 0x303, 0xF1},
    {U'o', 0x300, 0xF2}, {U'o', 0x301, 0xF3}, {U'o', 0x302, 0xF4},
    {U'o', 0x303, 0xF5}, {U'o', 0x308, 0xF6},
    {U'u', 0x300, 0xF9}, {U'u', 0x301, 0xFA}, {U'u', 0x302, 0xFB}, {U'u', 0x308, 0xFC},
    {U'y', 0x301, 0xFD}, {U'y', 0x308, 0xFF},
}};

char32_t lookup_composed(char32_t base, char32_t mark) {
    for (const auto& c : kCompositions) {
        if (c.base == base && c.mark == mark) return c.composed;
    }
    return 0;
}

}  // namespace

void compose_latin(std::vector<char32_t>& points) {
    std::size_t w = 0;
    for (std::size_t r = 0; r < points.size(); ++r) {
        const char32_t cp = points[r];
        if (w > 0 && cp >= 0x300 && cp <= 0x36F) {
            if (const char32_t composed = lookup_composed(points[w - 1], cp)) {
                points[w - 1] = composed;
                continue;
            }
        }
        points[w++] = cp;
    }
    points.resize(w);
}

}  // namespace osiq::unicode
