#include "cprdraft/cardset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "cprdraft/error.hpp"
#include "cprdraft/random.hpp"

namespace cprdraft {

namespace {

constexpr std::string_view kHeader = "id,name,colors,rarity";
constexpr std::string_view kVersionTag = "# cprdraft-cards v";

std::string error_at(std::size_t line, const std::string& what) {
  return "card database line " + std::to_string(line) + ": " + what;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// RFC 4180-style field splitting: fields may be double-quoted, with "" as an
// escaped quote inside.
std::vector<std::string> split_csv(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && trim(field).empty()) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw InputError(error_at(line_no, "unterminated quoted field"));
  fields.push_back(was_quoted ? field : std::string(trim(field)));
  return fields;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos && trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string canonical_line(const Card& card) {
  return std::to_string(index(card.id)) + ',' + quote_csv(card.name) + ',' +
         card.colors.letters() + ',' + std::string(to_string(card.rarity));
}

}  // namespace

char color_letter(Color c) {
  static constexpr std::array<char, 5> kLetters = {'W', 'U', 'B', 'R', 'G'};
  return kLetters[index(c)];
}

std::string_view color_name(Color c) {
  static constexpr std::array<std::string_view, 5> kNames = {"White", "Blue", "Black", "Red",
                                                             "Green"};
  return kNames[index(c)];
}

std::optional<Color> ColorSet::mono() const {
  if (size() != 1) return std::nullopt;
  for (Color c : kAllColors)
    if (contains(c)) return c;
  return std::nullopt;
}

std::string ColorSet::letters() const {
  std::string out;
  for (Color c : kAllColors)
    if (contains(c)) out.push_back(color_letter(c));
  return out;
}

ColorSet ColorSet::parse(std::string_view letters) {
  ColorSet set;
  for (char ch : letters) {
    bool matched = false;
    for (Color c : kAllColors) {
      if (ch == color_letter(c) || ch == color_letter(c) + ('a' - 'A')) {
        set.insert(c);
        matched = true;
      }
    }
    if (!matched) throw InputError("unknown color token '" + std::string(1, ch) + "'");
  }
  return set;
}

std::string_view to_string(Rarity r) {
  static constexpr std::array<std::string_view, 4> kNames = {"common", "uncommon", "rare",
                                                             "mythic"};
  return kNames[index(r)];
}

Rarity parse_rarity(std::string_view token) {
  for (Rarity r : kAllRarities)
    if (token == to_string(r)) return r;
  throw InputError("unknown rarity token '" + std::string(token) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash) {
  for (unsigned char b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

CardDatabase::CardDatabase(std::vector<Card> cards) : cards_(std::move(cards)) {
  if (cards_.empty()) throw InputError("empty database");
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < cards_.size(); ++i) {
    const Card& c = cards_[i];
    if (index(c.id) != i) {
      throw InputError("card ids must be 0..N-1 in order; found id " +
                       std::to_string(index(c.id)) + " at position " + std::to_string(i));
    }
    if (!names.insert(c.name).second) throw InputError("duplicate card name '" + c.name + "'");
    by_rarity_[index(c.rarity)].push_back(c.id);
  }
  for (Rarity r : kAllRarities) {
    if (by_rarity_[index(r)].empty())
      throw InputError("database has no " + std::string(to_string(r)) + " cards");
  }
  std::uint64_t h = fnv1a64(kHeader);
  for (const Card& c : cards_) h = fnv1a64(canonical_line(c) + '\n', h);
  fingerprint_ = h;
}

const Card& CardDatabase::card(CardId id) const {
  if (!contains(id))
    throw InputError("card id " + std::to_string(index(id)) + " out of range (N=" +
                     std::to_string(cards_.size()) + ")");
  return cards_[index(id)];
}

std::optional<CardId> CardDatabase::find(std::string_view name) const {
  for (const Card& c : cards_)
    if (c.name == name) return c.id;
  return std::nullopt;
}

CardDatabase parse_card_database(std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  std::map<std::size_t, std::pair<Card, std::size_t>> by_id;
  std::unordered_set<std::string> names;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.starts_with(kVersionTag)) {
        int version = 0;
        std::istringstream(std::string(line.substr(kVersionTag.size()))) >> version;
        if (version != kCardDatabaseVersion)
          throw InputError(error_at(line_no, "unsupported format version"));
      }
      continue;
    }
    if (!have_header) {
      if (line != kHeader)
        throw InputError(error_at(line_no, "expected header '" + std::string(kHeader) + "'"));
      have_header = true;
      continue;
    }
    auto fields = split_csv(line, line_no);
    if (fields.size() != 4)
      throw InputError(error_at(line_no, "expected 4 fields, got " + std::to_string(fields.size())));

    Card card;
    std::size_t id = 0;
    try {
      std::size_t used = 0;
      long long parsed = std::stoll(fields[0], &used);
      if (used != fields[0].size() || parsed < 0) throw std::invalid_argument("id");
      id = static_cast<std::size_t>(parsed);
    } catch (const std::logic_error&) {
      throw InputError(error_at(line_no, "invalid id '" + fields[0] + "'"));
    }
    card.id = card_id(id);
    card.name = fields[1];
    if (card.name.empty()) throw InputError(error_at(line_no, "empty card name"));
    try {
      card.colors = ColorSet::parse(fields[2]);
      card.rarity = parse_rarity(fields[3]);
    } catch (const InputError& e) {
      throw InputError(error_at(line_no, e.what()));
    }
    if (by_id.contains(id))
      throw InputError(error_at(line_no, "duplicate id " + std::to_string(id)));
    if (!names.insert(card.name).second)
      throw InputError(error_at(line_no, "duplicate name '" + card.name + "'"));
    by_id.emplace(id, std::make_pair(std::move(card), line_no));
  }
  if (!have_header && by_id.empty()) throw InputError("empty database");
  if (by_id.empty()) throw InputError("empty database");

  std::vector<Card> cards;
  cards.reserve(by_id.size());
  for (auto& [id, entry] : by_id) {
    if (id != cards.size())
      throw InputError(error_at(entry.second, "ids must be contiguous from 0; missing id " +
                                                  std::to_string(cards.size())));
    cards.push_back(std::move(entry.first));
  }
  return CardDatabase(std::move(cards));
}

CardDatabase load_card_database(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open card database " + path.string());
  return parse_card_database(in);
}

void write_card_database(std::ostream& out, const CardDatabase& db) {
  out << kVersionTag << kCardDatabaseVersion << '\n' << kHeader << '\n';
  for (const Card& c : db.cards()) out << canonical_line(c) << '\n';
}

void save_card_database(const std::filesystem::path& path, const CardDatabase& db) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write card database " + path.string());
  write_card_database(out, db);
  if (!out) throw InputError("write failed for " + path.string());
}

CardDatabase make_synthetic_database(const SyntheticDatabaseOptions& options) {
  const std::size_t n = options.cards;
  if (n < 4) throw InputError("synthetic database needs at least 4 cards");
  auto share = [n](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(f * double(n))));
  };
  const std::size_t mythics = share(0.06);
  const std::size_t uncommons = share(0.30);
  const std::size_t rares = share(0.19);
  if (mythics + uncommons + rares >= n) throw InputError("synthetic database too small");
  const std::size_t commons = n - mythics - uncommons - rares;

  std::vector<Rarity> rarities;
  rarities.insert(rarities.end(), commons, Rarity::Common);
  rarities.insert(rarities.end(), uncommons, Rarity::Uncommon);
  rarities.insert(rarities.end(), rares, Rarity::Rare);
  rarities.insert(rarities.end(), mythics, Rarity::Mythic);

  Rng rng(derive_seed(options.seed, 0xCA4D));
  const auto colorless = static_cast<std::size_t>(std::lround(options.colorless_fraction * double(n)));
  const auto multi = static_cast<std::size_t>(std::lround(options.multicolor_fraction * double(n)));
  if (colorless + multi > n) throw InputError("color fractions exceed 1");

  // 0 = mono, 1 = colorless, 2 = multicolored; special slots at random positions.
  std::vector<int> kind(n, 0);
  std::fill_n(kind.begin(), colorless, 1);
  std::fill_n(kind.begin() + static_cast<std::ptrdiff_t>(colorless), multi, 2);
  std::shuffle(kind.begin(), kind.end(), rng);

  static constexpr std::array<std::pair<Color, Color>, 10> kPairs = {{
      {Color::White, Color::Blue}, {Color::Blue, Color::Black}, {Color::Black, Color::Red},
      {Color::Red, Color::Green},  {Color::Green, Color::White}, {Color::White, Color::Black},
      {Color::Blue, Color::Red},   {Color::Black, Color::Green}, {Color::Red, Color::White},
      {Color::Green, Color::Blue},
  }};

  std::size_t next_mono = rng() % 5;
  std::size_t next_pair = rng() % kPairs.size();
  std::map<std::string, int> serial;
  std::vector<Card> cards;
  cards.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Card card;
    card.id = card_id(i);
    card.rarity = rarities[i];
    std::string label;
    if (kind[i] == 1) {
      label = "Colorless";
    } else if (kind[i] == 2) {
      auto [a, b] = kPairs[next_pair++ % kPairs.size()];
      card.colors = ColorSet{a, b};
      label = card.colors.letters();
    } else {
      Color c = kAllColors[next_mono++ % 5];
      card.colors = ColorSet{c};
      label = std::string(color_name(c));
    }
    std::string rarity(to_string(card.rarity));
    rarity[0] = static_cast<char>(rarity[0] - 'a' + 'A');
    label += ' ' + rarity;
    card.name = label + ' ' + std::to_string(++serial[label]);
    cards.push_back(std::move(card));
  }
  return CardDatabase(std::move(cards));
}

}  // namespace cprdraft
