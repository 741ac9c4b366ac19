#include "trapgrad/dataset.hpp"

#include <fstream>
#include <sstream>

#include "trapgrad/error.hpp"

namespace trapgrad {

TextDataset load_text_dataset(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open dataset file: " + path);

  TextDataset data;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(Errc::parse, "line " + std::to_string(line_no) + ": expected label<TAB>text");
    }
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(line.substr(0, tab), &used);
      if (used != tab || label < 0) throw std::invalid_argument("label");
    } catch (const std::exception&) {
      fail(Errc::parse, "line " + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    data.examples.push_back(TextExample{label, line.substr(tab + 1)});
    if (label + 1 > data.num_classes) data.num_classes = label + 1;
  }
  require(!data.examples.empty(), Errc::empty_input, "empty corpus");
  return data;
}

void save_text_dataset(const TextDataset& data, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write dataset file: " + path);
  for (const auto& ex : data.examples) out << ex.label << '\t' << ex.text << '\n';
  require(out.good(), Errc::io, "write failed: " + path);
}

std::array<TextDataset, 3> split_dataset(const TextDataset& data, Rng& rng) {
  require(data.size() >= 10, Errc::invalid_argument, "need at least 10 examples to split");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(data.num_classes));
  for (int i = 0; i < static_cast<int>(data.size()); ++i) {
    by_class[static_cast<std::size_t>(data.examples[static_cast<std::size_t>(i)].label)].push_back(i);
  }

  std::array<TextDataset, 3> parts;
  for (auto& p : parts) p.num_classes = data.num_classes;

  for (auto& indices : by_class) {
    require(indices.size() >= 10, Errc::invalid_argument,
            "every class needs at least 10 examples to split 8:1:1");
    rng.shuffle(indices);
    const int n = static_cast<int>(indices.size());
    const int n_hold = n / 10;  // attack and test each
    for (int i = 0; i < n; ++i) {
      const auto& ex = data.examples[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
      if (i < n - 2 * n_hold) {
        parts[0].examples.push_back(ex);
      } else if (i < n - n_hold) {
        parts[1].examples.push_back(ex);
      } else {
        parts[2].examples.push_back(ex);
      }
    }
  }
  return parts;
}

}  // namespace trapgrad
