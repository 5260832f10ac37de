#include "hdh/hash_code.hpp"

#include "hdh/errors.hpp"

#include <cctype>

namespace hdh {

namespace {

std::uint64_t pad_mask(std::size_t bits) {
    const std::size_t used = bits % 64;
    return used == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << used) - 1;
}

} // namespace

HashCode::HashCode(std::size_t bits) : bits_(bits), words_(words_for_bits(bits), 0) {}

HashCode::HashCode(std::size_t bits, std::vector<std::uint64_t> words)
    : bits_(bits), words_(std::move(words)) {
    if (words_.size() != words_for_bits(bits_)) {
        throw ShapeError("a " + std::to_string(bits_) + "-bit code needs " +
                         std::to_string(words_for_bits(bits_)) + " words, got " +
                         std::to_string(words_.size()));
    }
    if (!words_.empty() && (words_.back() & ~pad_mask(bits_)) != 0) {
        throw DomainError("hash code has pad bits set beyond bit " + std::to_string(bits_));
    }
}

HashCode HashCode::from_bits(std::span<const std::uint8_t> bits) {
    HashCode code(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) code.set(i, bits[i] != 0);
    return code;
}

bool HashCode::test(std::size_t i) const {
    if (i >= bits_) throw ShapeError("bit index out of range");
    return (words_[i / 64] >> (i % 64)) & 1u;
}

void HashCode::set(std::size_t i, bool value) {
    if (i >= bits_) throw ShapeError("bit index out of range");
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (value) {
        words_[i / 64] |= mask;
    } else {
        words_[i / 64] &= ~mask;
    }
}

std::string HashCode::to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(words_.size() * 16);
    for (auto it = words_.rbegin(); it != words_.rend(); ++it) {
        for (int shift = 60; shift >= 0; shift -= 4) out.push_back(digits[(*it >> shift) & 0xF]);
    }
    return out;
}

HashCode HashCode::from_hex(const std::string& text, std::size_t bits) {
    std::string_view hex = text;
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    const std::size_t n_words = words_for_bits(bits);
    if (hex.empty() || hex.size() > n_words * 16) {
        throw InputError("hex code must have 1 to " + std::to_string(n_words * 16) + " digits");
    }
    std::vector<std::uint64_t> words(n_words, 0);
    // Digit at distance p from the right end holds bits [4p, 4p + 4).
    for (std::size_t p = 0; p < hex.size(); ++p) {
        const char c = hex[hex.size() - 1 - p];
        if (!std::isxdigit(static_cast<unsigned char>(c))) {
            throw InputError(std::string("invalid hex digit '") + c + "'");
        }
        const std::uint64_t nibble = std::isdigit(static_cast<unsigned char>(c))
                                         ? static_cast<std::uint64_t>(c - '0')
                                         : static_cast<std::uint64_t>(std::tolower(c) - 'a' + 10);
        words[p / 16] |= nibble << (4 * (p % 16));
    }
    if ((words.back() & ~pad_mask(bits)) != 0) {
        throw InputError("hex code sets bits beyond the code length " + std::to_string(bits));
    }
    return HashCode(bits, std::move(words));
}

std::string HashCode::to_bit_string() const {
    std::string out(bits_, '0');
    for (std::size_t i = 0; i < bits_; ++i) {
        if (test(i)) out[i] = '1';
    }
    return out;
}

} // namespace hdh
