// Copyright 2026 The kgprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kgprompt/kg/toy_kg.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "kgprompt/util/random.hpp"

namespace kgprompt::kg {

namespace {

const char* const kSyllables[] = {"ka", "lo", "mi", "ra", "ven", "to", "sa", "dor", "bel", "ni", "qua", "ri",
                                  "zen", "mo", "tal", "ver", "un", "pa", "gri", "lu", "fen", "os", "tir", "ma"};

const char* const kFirstNames[] = {"leonardo", "mona",  "vincent", "clara", "hugo",  "ada",
                                   "marco",    "lena",  "oscar",   "ines",  "felix", "nora",
                                   "pablo",    "greta", "ivan",    "sofia", "tomas", "elena",
                                   "bruno",    "alma",  "diego",   "rosa",  "emil",  "vera"};

struct Triple {
  std::string head, relation, tail;
};

class WordMaker {
 public:
  explicit WordMaker(util::Rng& rng) : rng_(rng) {
    for (const char* n : kFirstNames) used_.insert(n);
  }
  std::string next() {
    constexpr std::uint64_t kCount = sizeof(kSyllables) / sizeof(kSyllables[0]);
    while (true) {
      std::string w;
      const int parts = 2 + static_cast<int>(util::uniform_below(rng_, 2));
      for (int i = 0; i < parts; ++i) w += kSyllables[util::uniform_below(rng_, kCount)];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  util::Rng& rng_;
  std::set<std::string> used_;
};

std::string letters(int i) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('a' + i % 26));
    i = i / 26 - 1;
  } while (i >= 0);
  return s;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

std::string join_triples(const std::vector<Triple>& ts) {
  std::string out;
  for (const auto& t : ts) out += t.head + "\t" + t.relation + "\t" + t.tail + "\n";
  return out;
}

}  // namespace

const std::vector<ToyKgRule>& toy_kg_rules() {
  static const std::vector<ToyKgRule> rules = {
      {"citizen_of", {"born_in", "located_in"}},
      {"on_continent", {"located_in", "part_of"}},
      {"from_continent", {"born_in", "located_in", "part_of"}},
  };
  return rules;
}

const std::vector<std::string>& toy_kg_base_relations() {
  static const std::vector<std::string> base = {"part_of", "located_in", "born_in"};
  return base;
}

ToyKgFiles generate_toy_kg(const ToyKgParams& params, const std::filesystem::path& out_dir) {
  if (params.continents < 2 || params.countries_per_continent < 1 || params.cities_per_country < 1 ||
      params.persons_per_city < 1 || params.first_names < 1) {
    throw std::invalid_argument("generate_toy_kg: sizes must be positive and continents >= 2");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

  util::Rng rng = util::derive_rng(params.seed, 0x70794B47);
  WordMaker words(rng);

  std::vector<std::string> first_names;
  for (int i = 0; i < params.first_names; ++i) {
    first_names.push_back(i < 24 ? kFirstNames[i] : words.next());
  }
  util::shuffle(std::span<std::string>(first_names), rng);

  std::ostringstream etext;
  std::vector<Triple> base, citizen, on_cont, from_cont;

  std::vector<std::string> continent_ids, country_ids, country_words;
  std::vector<int> country_continent;
  for (int c = 0; c < params.continents; ++c) {
    const std::string w = words.next();
    continent_ids.push_back("continent_" + w);
    etext << continent_ids.back() << '\t' << w << "\ta continent\n";
  }
  for (int c = 0; c < params.continents; ++c) {
    for (int k = 0; k < params.countries_per_continent; ++k) {
      const std::string w = words.next();
      country_ids.push_back("country_" + w);
      country_words.push_back(w);
      country_continent.push_back(c);
      etext << country_ids.back() << '\t' << w << "\ta country\n";
      base.push_back({country_ids.back(), "part_of", continent_ids[static_cast<std::size_t>(c)]});
    }
  }
  const auto n_countries = static_cast<std::uint64_t>(country_ids.size());
  // A country on a different continent than `home`, for misleading text.
  auto foreign_country = [&](int home_continent) {
    while (true) {
      const auto pick = static_cast<std::size_t>(util::uniform_below(rng, n_countries));
      if (country_continent[pick] != home_continent) return country_words[pick];
    }
  };

  std::vector<int> name_uses(first_names.size(), 0);
  int person_index = 0;
  for (std::size_t co = 0; co < country_ids.size(); ++co) {
    const int cont = country_continent[co];
    for (int ci = 0; ci < params.cities_per_country; ++ci) {
      const std::string own = words.next();
      const std::string city_id = "city_" + own;
      etext << city_id << '\t' << own << ' ' << foreign_country(cont) << "\ta city\n";
      base.push_back({city_id, "located_in", country_ids[co]});
      on_cont.push_back({city_id, "on_continent", continent_ids[static_cast<std::size_t>(cont)]});
      for (int p = 0; p < params.persons_per_city; ++p, ++person_index) {
        // Consecutive persons cycle through the name pool, so namesakes land
        // in different cities (and, with the default sizes, countries).
        const auto slot = static_cast<std::size_t>(person_index) % first_names.size();
        const std::string& first = first_names[slot];
        const std::string pid = first + "_" + letters(name_uses[slot]++);
        etext << pid << '\t' << first << ' ' << words.next() << "\ta person who admires "
              << foreign_country(cont) << '\n';
        base.push_back({pid, "born_in", city_id});
        citizen.push_back({pid, "citizen_of", country_ids[co]});
        from_cont.push_back({pid, "from_continent", continent_ids[static_cast<std::size_t>(cont)]});
      }
    }
  }

  std::vector<Triple> train = base, valid, test;
  for (auto* derived : {&citizen, &on_cont, &from_cont}) {
    util::shuffle(std::span<Triple>(*derived), rng);
    const auto n = derived->size();
    const auto n_test = static_cast<std::size_t>(std::lround(params.test_fraction * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::lround(params.valid_fraction * static_cast<double>(n)));
    if (n_test + n_valid >= n) throw std::invalid_argument("generate_toy_kg: held-out fractions leave no training facts");
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_test ? test : (i < n_test + n_valid ? valid : train);
      dst.push_back((*derived)[i]);
    }
  }
  util::shuffle(std::span<Triple>(train), rng);

  ToyKgFiles files{out_dir / "train.txt",         out_dir / "valid.txt",         out_dir / "test.txt",
                   out_dir / "entity_text.txt",   out_dir / "relation_text.txt", out_dir / "README"};
  write_file(files.train, join_triples(train));
  write_file(files.valid, join_triples(valid));
  write_file(files.test, join_triples(test));
  write_file(files.entity_text, etext.str());
  write_file(files.relation_text,
             "part_of\tpart of\nlocated_in\tlocated in\nborn_in\tborn in\n"
             "citizen_of\tcitizen of\non_continent\ton continent\nfrom_continent\tfrom continent\n");

  std::ostringstream readme;
  readme << "Synthetic geography knowledge graph (seed " << params.seed << ")\n\n"
         << "Entities: " << params.continents << " continents, " << country_ids.size() << " countries, "
         << country_ids.size() * static_cast<std::size_t>(params.cities_per_country) << " cities, " << person_index
         << " persons.\n\n"
         << "Base relations (all facts in train):\n"
         << "  part_of     country -> continent\n"
         << "  located_in  city -> country\n"
         << "  born_in     person -> city\n\n"
         << "Derived relations (split into train/valid/test):\n"
         << "  citizen_of      = born_in . located_in\n"
         << "  on_continent    = located_in . part_of\n"
         << "  from_continent  = born_in . located_in . part_of\n\n"
         << "Every valid/test fact follows from train base facts by the chain above.\n\n"
         << "Text is misleading on purpose. A city name carries the name of a country\n"
         << "on another continent, a person description mentions such a country, and\n"
         << "first names repeat across countries (leonardo_a, leonardo_b, ...), so\n"
         << "namesakes share name tokens but never share a birth city or a country.\n";
  write_file(files.readme, readme.str());
  return files;
}

}  // namespace kgprompt::kg
