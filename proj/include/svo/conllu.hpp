#pragma once

// Streaming CoNLL-U reader. One sentence block is held in memory at a time.

#include <cstddef>
#include <iosfwd>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "svo/errors.hpp"
#include "svo/text.hpp"

namespace svo {

struct Token {
  int id = 0;
  std::string form;
  std::string lemma;
  std::string upos;
  int head = 0;
  std::string deprel;

  bool operator==(const Token&) const = default;
};

struct DepTree {
  std::vector<Token> tokens;
  std::optional<std::string> sentence_id;

  bool operator==(const DepTree&) const = default;
};

enum class IngestPolicy { lenient, strict };

enum class TreeViolation { empty, non_contiguous_ids, dangling_head, self_head, no_root, empty_field };

inline const char* to_string(TreeViolation v) {
  switch (v) {
    case TreeViolation::empty: return "empty";
    case TreeViolation::non_contiguous_ids: return "non_contiguous_ids";
    case TreeViolation::dangling_head: return "dangling_head";
    case TreeViolation::self_head: return "self_head";
    case TreeViolation::no_root: return "no_root";
    case TreeViolation::empty_field: return "empty_field";
  }
  return "unknown";
}

struct TreeValidation {
  std::vector<TreeViolation> violations;

  bool ok() const { return violations.empty(); }
  bool has(TreeViolation v) const {
    for (auto x : violations)
      if (x == v) return true;
    return false;
  }
};

/// Checks the structural invariants of a dependency tree. Each kind of
/// violation is reported once.
inline TreeValidation validate_tree(const DepTree& tree) {
  TreeValidation result;
  auto add = [&](TreeViolation v) {
    if (!result.has(v)) result.violations.push_back(v);
  };
  const auto n = static_cast<int>(tree.tokens.size());
  if (n == 0) {
    add(TreeViolation::empty);
    add(TreeViolation::no_root);
    return result;
  }
  bool any_root = false;
  for (int i = 0; i < n; ++i) {
    const Token& t = tree.tokens[static_cast<std::size_t>(i)];
    if (t.id != i + 1) add(TreeViolation::non_contiguous_ids);
    if (t.head < 0 || t.head > n) add(TreeViolation::dangling_head);
    if (t.head == t.id) add(TreeViolation::self_head);
    if (t.head == 0) any_root = true;
    if (t.form.empty() || t.lemma.empty()) add(TreeViolation::empty_field);
  }
  if (!any_root) add(TreeViolation::no_root);
  return result;
}

/// Writes the six consumed columns back out as a 10-column CoNLL-U block.
inline void write_conllu(std::ostream& out, const DepTree& tree) {
  if (tree.sentence_id) out << "# sent_id = " << *tree.sentence_id << '\n';
  for (const Token& t : tree.tokens) {
    out << t.id << '\t' << t.form << '\t' << t.lemma << '\t' << t.upos << "\t_\t_\t" << t.head
        << '\t' << t.deprel << "\t_\t_\n";
  }
  out << '\n';
}

class ConlluReader {
 public:
  explicit ConlluReader(std::istream& in, IngestPolicy policy = IngestPolicy::lenient)
      : in_(&in), policy_(policy) {}

  /// Next well-formed sentence, or nullopt at end of stream. In strict mode a
  /// malformed line or invalid tree throws MalformedLine.
  std::optional<DepTree> next() {
    while (true) {
      auto block = read_block();
      if (!block) return std::nullopt;
      if (block->tree.tokens.empty() && block->error.empty()) continue;  // comment-only block
      if (block->error.empty()) {
        const auto v = validate_tree(block->tree);
        if (v.ok()) {
          ++sentences_;
          return std::move(block->tree);
        }
        block->error = std::string("invalid tree: ") + to_string(v.violations.front());
        block->error_line = block->start_line;
      }
      if (policy_ == IngestPolicy::strict) throw MalformedLine(block->error_line, block->error);
      ++skipped_;
    }
  }

  std::size_t sentences_read() const { return sentences_; }
  std::size_t sentences_skipped() const { return skipped_; }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = DepTree;
    using difference_type = std::ptrdiff_t;
    using pointer = const DepTree*;
    using reference = const DepTree&;

    iterator() = default;
    explicit iterator(ConlluReader* r) : reader_(r) { ++*this; }

    reference operator*() const { return *current_; }
    pointer operator->() const { return &*current_; }
    iterator& operator++() {
      current_ = reader_->next();
      if (!current_) reader_ = nullptr;
      return *this;
    }
    void operator++(int) { ++*this; }
    bool operator==(const iterator& o) const { return reader_ == o.reader_; }

   private:
    ConlluReader* reader_ = nullptr;
    std::optional<DepTree> current_;
  };

  iterator begin() { return iterator(this); }
  iterator end() { return iterator(); }

 private:
  struct Block {
    DepTree tree;
    std::string error;
    std::size_t error_line = 0;
    std::size_t start_line = 0;
  };

  // Reads lines up to the next blank line (or EOF). Returns nullopt only when
  // the stream is exhausted without any content.
  std::optional<Block> read_block() {
    Block block;
    bool any_line = false;
    std::string raw;
    while (std::getline(*in_, raw)) {
      ++line_no_;
      const std::string_view line = text::strip_cr(raw);
      if (line.empty()) {
        if (any_line) return block;
        continue;
      }
      if (!any_line) block.start_line = line_no_;
      any_line = true;
      if (!block.error.empty()) continue;  // drain the rest of a bad sentence
      if (line.front() == '#') {
        parse_comment(line, block.tree);
        continue;
      }
      parse_token_line(line, block);
    }
    if (any_line) return block;
    return std::nullopt;
  }

  static void parse_comment(std::string_view line, DepTree& tree) {
    line.remove_prefix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    constexpr std::string_view key = "sent_id";
    if (line.substr(0, key.size()) != key) return;
    line.remove_prefix(key.size());
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty() || line.front() != '=') return;
    line.remove_prefix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    tree.sentence_id = std::string(line);
  }

  void parse_token_line(std::string_view line, Block& block) const {
    auto fail = [&](std::string msg) {
      block.error = std::move(msg);
      block.error_line = line_no_;
    };
    const auto cols = text::split(line, '\t');
    if (cols.size() != 10) {
      fail("expected 10 columns, got " + std::to_string(cols.size()));
      return;
    }
    const std::string_view id_field = cols[0];
    if (id_field.find('-') != std::string_view::npos || id_field.find('.') != std::string_view::npos)
      return;  // multiword range or empty node
    const auto id = text::parse_int<int>(id_field);
    if (!id || *id < 1) {
      fail("unparseable id '" + std::string(id_field) + "'");
      return;
    }
    const auto head = text::parse_int<int>(cols[6]);
    if (!head || *head < 0) {
      fail("unparseable head '" + std::string(cols[6]) + "'");
      return;
    }
    Token t;
    t.id = *id;
    t.form = std::string(cols[1]);
    t.lemma = cols[2] == "_" ? text::ascii_lower(cols[1]) : std::string(cols[2]);
    t.upos = std::string(cols[3]);
    t.head = *head;
    t.deprel = std::string(cols[7]);
    block.tree.tokens.push_back(std::move(t));
  }

  std::istream* in_;
  IngestPolicy policy_;
  std::size_t line_no_ = 0;
  std::size_t sentences_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace svo
