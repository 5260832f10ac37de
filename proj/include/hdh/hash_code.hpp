#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hdh {

/// k-bit binary code packed little-endian into 64-bit words: bit i lives in
/// word i / 64 at position i % 64. Pad bits above k are always zero.
class HashCode {
public:
    HashCode() = default;
    /// All-zero code of `bits` bits.
    explicit HashCode(std::size_t bits);
    /// Takes ownership of packed words; throws if the word count is wrong or pad bits are set.
    HashCode(std::size_t bits, std::vector<std::uint64_t> words);

    static HashCode from_bits(std::span<const std::uint8_t> bits);

    std::size_t size() const { return bits_; }
    std::size_t word_count() const { return words_.size(); }
    std::span<const std::uint64_t> words() const { return words_; }

    bool test(std::size_t i) const;
    void set(std::size_t i, bool value);

    /// Whole words, most-significant word first, 16 lowercase hex digits each.
    std::string to_hex() const;
    /// Accepts an optional 0x prefix and up to 16 * ceil(bits / 64) hex digits, right-aligned.
    static HashCode from_hex(const std::string& text, std::size_t bits);

    /// "0101..." with bit 0 first.
    std::string to_bit_string() const;

    auto operator<=>(const HashCode&) const = default;

private:
    std::size_t bits_ = 0;
    std::vector<std::uint64_t> words_;
};

inline std::size_t words_for_bits(std::size_t bits) { return (bits + 63) / 64; }

} // namespace hdh
