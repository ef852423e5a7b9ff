// Copyright 2026 The MedMatch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "medmatch/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace medmatch {

namespace {

struct Concept {
  const char* canonical;
  std::vector<const char*> aliases;
};

const std::vector<Concept>& procedures() {
  static const std::vector<Concept> table = {
      {"radiografie", {"rx", "xray", "roentgen", "radiograma"}},
      {"ecografie", {"eco", "usg", "ultrasonografie", "sonografie"}},
      {"tomografie computerizata", {"ct", "tc", "computer tomograf", "scanare ct"}},
      {"rezonanta magnetica", {"rmn", "irm", "mri", "imagistica rm"}},
      {"consultatie", {"consult", "vizita medic", "examinare clinica", "control medical"}},
      {"electrocardiograma", {"ekg", "ecg", "traseu electric", "electrocardiografie"}},
      {"biopsie", {"bx", "prelevare tesut", "punctie bioptica", "examen bioptic"}},
      {"scintigrafie", {"scinti", "medicina nucleara", "imagistica izotopica", "spect"}},
      {"osteodensitometrie", {"dexa", "densitometrie osoasa", "dxa", "test osteoporoza"}},
      {"angiografie", {"angio", "arteriografie", "vizualizare vase", "cateterism vascular"}},
  };
  return table;
}

const std::vector<Concept>& sites() {
  static const std::vector<Concept> table = {
      {"torace", {"toracic", "chest", "piept", "thorax"}},
      {"abdomen", {"abdominal", "abd", "burta", "abdominala"}},
      {"craniu", {"cranian", "cap", "head", "cerebral"}},
      {"genunchi", {"knee", "articulatie genunchi", "genunchiului", "gen"}},
      {"coloana lombara", {"lombar", "l spine", "spate jos", "vertebre lombare"}},
      {"sold", {"hip", "coxofemural", "articulatie sold", "soldului"}},
      {"umar", {"shoulder", "scapulohumeral", "umarului", "articulatie umar"}},
      {"tiroida", {"tiroidian", "thyroid", "glanda tiroida", "tiroidiana"}},
      {"rinichi", {"renal", "kidney", "renala", "aparat urinar"}},
      {"cord", {"inima", "cardiac", "heart", "cardiaca"}},
  };
  return table;
}

const std::vector<Concept>& modifiers() {
  static const std::vector<Concept> table = {
      {"standard", {"simplu", "obisnuit", "de baza", "uzual"}},
      {"cu contrast", {"contrast iv", "cu substanta de contrast", "substanta contrast", "cu sdc"}},
      {"fara contrast", {"nativ", "fara sdc", "necontrastat", "fara substanta"}},
      {"bilateral", {"ambele parti", "bilat", "dublu", "stanga dreapta"}},
      {"o incidenta", {"1 incidenta", "o pozitie", "frontal", "o proiectie"}},
      {"pediatric", {"copii", "la copil", "pediatrie", "pentru copii"}},
      {"de urgenta", {"urgent", "urgenta", "regim urgenta", "cito"}},
  };
  return table;
}

const std::array<const char*, 6> kFiller = {"clinica", "ambulatoriu", "pachet", "serviciu", "investigatie", "tarif"};

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::string render(const Concept& c, std::mt19937_64& rng) {
  // One variant in five keeps the canonical wording, but with a typo.
  if (pick(rng, 5) == 0) {
    std::string w = c.canonical;
    if (w.size() > 4) w.erase(1 + pick(rng, w.size() - 2), 1);
    return w;
  }
  return c.aliases[pick(rng, c.aliases.size())];
}

}  // namespace

Corpus make_synthetic_corpus(const SyntheticConfig& config) {
  std::mt19937_64 rng(config.seed);
  const auto& proc = procedures();
  const auto& site = sites();
  const auto& mod = modifiers();
  const std::size_t combos = proc.size() * site.size() * mod.size();

  // A seeded permutation of the combination space, so small corpora still
  // spread over every concept.
  std::vector<std::size_t> order(combos);
  for (std::size_t i = 0; i < combos; ++i) order[i] = i;
  for (std::size_t i = combos; i > 1; --i) std::swap(order[i - 1], order[pick(rng, i)]);

  std::vector<MasterlistEntry> masterlist;
  std::vector<MappingPair> pairs;
  masterlist.reserve(config.entries);
  pairs.reserve(config.entries * config.variants_per_entry);
  const int width = std::to_string(config.entries).size() > 5 ? static_cast<int>(std::to_string(config.entries).size()) : 5;

  for (std::size_t e = 0; e < config.entries; ++e) {
    const std::size_t combo = order[e % combos];
    const Concept* parts[3] = {&proc[combo % proc.size()], &site[(combo / proc.size()) % site.size()],
                               &mod[combo / (proc.size() * site.size())]};
    std::string id = std::to_string(e + 1);
    id = "M" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(id.size(), width), '0') + id;
    std::string code = e >= combos ? " cod " + std::to_string(e / combos) : "";
    masterlist.push_back({id, std::string(parts[0]->canonical) + " " + parts[1]->canonical + " " +
                                  parts[2]->canonical + code});

    std::set<std::string> seen{masterlist.back().text};
    for (std::size_t v = 0; v < config.variants_per_entry; ++v) {
      std::string text;
      for (int attempt = 0; attempt < 50; ++attempt) {
        std::vector<std::string> words;
        for (const Concept* c : parts) words.push_back(render(*c, rng));
        if (pick(rng, 3) == 0) std::swap(words[0], words[1 + pick(rng, 2)]);
        if (pick(rng, 2) == 0) words.insert(words.begin() + static_cast<std::ptrdiff_t>(pick(rng, words.size() + 1)), kFiller[pick(rng, kFiller.size())]);
        text.clear();
        for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
        text += code;
        if (!seen.contains(text)) break;
        // Distinguish an unavoidable repeat with a counter word.
        if (attempt == 49) text += " v" + std::to_string(v);
      }
      seen.insert(text);
      pairs.push_back({text, id, PairSource::dataset, std::nullopt});
    }
  }
  return Corpus(std::move(masterlist), std::move(pairs));
}

}  // namespace medmatch
