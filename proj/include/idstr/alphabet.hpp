#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "idstr/errors.hpp"

namespace idstr {

using Symbol = std::uint8_t;
using Sequence = std::vector<Symbol>;

/// Ordered finite set of printable symbols with dense indices 0..size-1.
class Alphabet {
public:
    explicit Alphabet(std::string_view symbols) : symbols_(symbols) {
        if (symbols_.size() < 2)
            throw std::invalid_argument("alphabet needs at least two symbols");
        if (symbols_.size() > 255)
            throw std::invalid_argument("alphabet too large");
        index_.fill(-1);
        for (std::size_t i = 0; i < symbols_.size(); ++i) {
            auto c = static_cast<unsigned char>(symbols_[i]);
            if (index_[c] != -1)
                throw std::invalid_argument(std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
            index_[c] = static_cast<int>(i);
        }
    }

    static const Alphabet& dna() {
        static const Alphabet a("ACGT");
        return a;
    }
    static const Alphabet& binary() {
        static const Alphabet a("01");
        return a;
    }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(symbols_.size()); }
    [[nodiscard]] const std::string& symbols() const noexcept { return symbols_; }

    [[nodiscard]] bool contains(char c) const noexcept {
        return index_[static_cast<unsigned char>(c)] >= 0;
    }

    [[nodiscard]] Symbol index_of(char c) const {
        int i = index_[static_cast<unsigned char>(c)];
        if (i < 0)
            throw FormatError(std::string("symbol '") + c + "' not in alphabet \"" + symbols_ + "\"");
        return static_cast<Symbol>(i);
    }

    [[nodiscard]] char symbol_at(Symbol i) const {
        if (i >= symbols_.size())
            throw std::out_of_range("symbol index out of range");
        return symbols_[i];
    }

    [[nodiscard]] Sequence encode(std::string_view text) const {
        Sequence s;
        s.reserve(text.size());
        for (char c : text)
            s.push_back(index_of(c));
        return s;
    }

    [[nodiscard]] std::string decode(const Sequence& s) const {
        std::string out;
        out.reserve(s.size());
        for (Symbol i : s)
            out.push_back(symbol_at(i));
        return out;
    }

    [[nodiscard]] bool valid(const Sequence& s) const noexcept {
        for (Symbol i : s)
            if (i >= symbols_.size())
                return false;
        return true;
    }

private:
    std::string symbols_;
    std::array<int, 256> index_{};
};

} // namespace idstr
