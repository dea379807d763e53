#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cprdraft {

/// Index of a card in its database, in [0, N).
enum class CardId : std::uint32_t {};

constexpr std::size_t index(CardId id) { return static_cast<std::size_t>(id); }
constexpr CardId card_id(std::size_t i) { return static_cast<CardId>(i); }

enum class Color : std::uint8_t { White, Blue, Black, Red, Green };

inline constexpr std::array<Color, 5> kAllColors = {
    Color::White, Color::Blue, Color::Black, Color::Red, Color::Green};

constexpr std::size_t index(Color c) { return static_cast<std::size_t>(c); }
char color_letter(Color c);
std::string_view color_name(Color c);

/// Subset of the five colors. Empty means colorless, two or more means
/// multicolored.
class ColorSet {
 public:
  constexpr ColorSet() = default;
  constexpr ColorSet(std::initializer_list<Color> colors) {
    for (Color c : colors) insert(c);
  }

  constexpr void insert(Color c) { bits_ |= static_cast<std::uint8_t>(1u << index(c)); }
  constexpr bool contains(Color c) const { return (bits_ >> index(c)) & 1u; }
  constexpr int size() const { return __builtin_popcount(bits_); }
  constexpr bool colorless() const { return bits_ == 0; }
  constexpr bool multicolored() const { return size() >= 2; }
  constexpr std::uint8_t bits() const { return bits_; }

  /// The single color of a mono-colored set.
  std::optional<Color> mono() const;

  /// Letters in WUBRG order, empty for colorless.
  std::string letters() const;
  static ColorSet parse(std::string_view letters);

  constexpr bool operator==(const ColorSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

enum class Rarity : std::uint8_t { Common, Uncommon, Rare, Mythic };

inline constexpr std::array<Rarity, 4> kAllRarities = {
    Rarity::Common, Rarity::Uncommon, Rarity::Rare, Rarity::Mythic};

constexpr std::size_t index(Rarity r) { return static_cast<std::size_t>(r); }
std::string_view to_string(Rarity r);
Rarity parse_rarity(std::string_view token);

struct Card {
  CardId id{};
  std::string name;
  ColorSet colors;
  Rarity rarity = Rarity::Common;

  bool operator==(const Card&) const = default;
};

/// Validated, immutable card set. N is the number of cards and fixes the
/// input dimensionality of every model trained on it.
class CardDatabase {
 public:
  /// Throws InputError unless ids are exactly 0..N-1 in order, names are
  /// unique and every rarity is represented.
  explicit CardDatabase(std::vector<Card> cards);

  std::size_t size() const { return cards_.size(); }
  bool contains(CardId id) const { return index(id) < cards_.size(); }
  const Card& card(CardId id) const;
  std::span<const Card> cards() const { return cards_; }
  std::span<const CardId> with_rarity(Rarity r) const { return by_rarity_[index(r)]; }
  std::optional<CardId> find(std::string_view name) const;

  /// FNV-1a over the canonical text form; binds models to this card set.
  std::uint64_t fingerprint() const { return fingerprint_; }

  bool operator==(const CardDatabase& other) const { return cards_ == other.cards_; }

 private:
  std::vector<Card> cards_;
  std::array<std::vector<CardId>, 4> by_rarity_;
  std::uint64_t fingerprint_ = 0;
};

inline constexpr int kCardDatabaseVersion = 1;

CardDatabase parse_card_database(std::istream& in);
CardDatabase load_card_database(const std::filesystem::path& path);
void write_card_database(std::ostream& out, const CardDatabase& db);
void save_card_database(const std::filesystem::path& path, const CardDatabase& db);

struct SyntheticDatabaseOptions {
  std::size_t cards = 30;
  double colorless_fraction = 0.04;
  double multicolor_fraction = 0.08;
  std::uint64_t seed = 1;
};

/// Desk-scale stand-in for a real set: rarity proportions roughly follow a
/// retail set (about 45% common, 30% uncommon, 6% mythic, rest rare), with
/// mono-colored cards spread evenly over the five colors.
CardDatabase make_synthetic_database(const SyntheticDatabaseOptions& options);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace cprdraft
