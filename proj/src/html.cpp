#include <algorithm>
#include <cctype>
#include <memory>
#include <optional>
#include <unordered_map>

#include "starqa/errors.hpp"
#include "starqa/text.hpp"
#include "starqa/tree.hpp"

namespace starqa {
namespace {

struct Event {
  enum class Kind { title, heading, text } kind;
  int level = 0;  // 1..6 for headings
  std::string content;
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x110000) {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string decode_entities(std::string_view raw) {
  static const std::unordered_map<std::string_view, char32_t> kNamed = {
      {"amp", U'&'},     {"lt", U'<'},      {"gt", U'>'},      {"quot", U'"'},   {"apos", U'\''},
      {"nbsp", 0xA0},    {"ndash", 0x2013}, {"mdash", 0x2014}, {"hellip", 0x2026}, {"rsquo", 0x2019},
      {"lsquo", 0x2018}, {"rdquo", 0x201D}, {"ldquo", 0x201C}, {"copy", 0xA9},   {"reg", 0xAE},
      {"euro", 0x20AC},  {"pound", 0xA3},   {"middot", 0xB7},  {"raquo", 0xBB},  {"laquo", 0xAB}};
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '&') {
      out.push_back(raw[i]);
      continue;
    }
    const auto semi = raw.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto name = raw.substr(i + 1, semi - i - 1);
    std::optional<char32_t> cp;
    if (!name.empty() && name[0] == '#') {
      try {
        const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
        const auto digits = std::string(name.substr(hex ? 2 : 1));
        if (!digits.empty()) cp = static_cast<char32_t>(std::stoul(digits, nullptr, hex ? 16 : 10));
      } catch (const std::exception&) {
      }
    } else if (auto it = kNamed.find(name); it != kNamed.end()) {
      cp = it->second;
    }
    if (!cp) {
      out.push_back('&');
      continue;
    }
    append_utf8(out, *cp);
    i = semi;
  }
  return out;
}

bool is_block_tag(std::string_view name) {
  static constexpr std::string_view kBlock[] = {"p",  "div", "br",    "li",     "ul",     "ol",
                                                "tr", "td",  "th",    "table",  "section", "article",
                                                "dd", "dt",  "dl",    "header", "footer", "blockquote",
                                                "pre", "hr", "nav",   "main",   "aside",  "tbody"};
  return std::find(std::begin(kBlock), std::end(kBlock), name) != std::end(kBlock);
}

int heading_level(std::string_view name) {
  if (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6') return name[1] - '0';
  return 0;
}

// Scans the markup into title/heading/text events.
std::vector<Event> scan(std::string_view html) {
  std::vector<Event> events;
  std::string buffer;
  enum class Capture { text, heading, title } capture = Capture::text;
  int open_heading = 0;

  auto flush = [&](Event::Kind kind, int level) {
    auto content = text::collapse_whitespace(decode_entities(buffer));
    buffer.clear();
    if (!content.empty()) events.push_back(Event{kind, level, std::move(content)});
  };

  std::size_t i = 0;
  while (i < html.size()) {
    if (html[i] != '<') {
      const auto next = html.find('<', i);
      const auto end = next == std::string_view::npos ? html.size() : next;
      buffer.append(html.substr(i, end - i));
      i = end;
      continue;
    }
    if (html.compare(i, 4, "<!--") == 0) {
      const auto close = html.find("-->", i + 4);
      if (close == std::string_view::npos) throw ParseError("unterminated HTML comment at offset " + std::to_string(i));
      i = close + 3;
      continue;
    }
    // A '<' not followed by a tag-ish character is literal text.
    if (i + 1 >= html.size() ||
        !(std::isalpha(static_cast<unsigned char>(html[i + 1])) || html[i + 1] == '/' || html[i + 1] == '!' ||
          html[i + 1] == '?')) {
      buffer.push_back('<');
      ++i;
      continue;
    }
    // Find the end of the tag, skipping quoted attribute values.
    std::size_t j = i + 1;
    char quote = 0;
    for (; j < html.size(); ++j) {
      const char c = html[j];
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '>') {
        break;
      }
    }
    if (j >= html.size()) throw ParseError("unterminated tag at offset " + std::to_string(i));
    const auto tag = html.substr(i + 1, j - i - 1);
    i = j + 1;
    if (tag.empty() || tag[0] == '!' || tag[0] == '?') continue;

    const bool closing = tag[0] == '/';
    std::size_t name_end = closing ? 1 : 0;
    while (name_end < tag.size() && std::isalnum(static_cast<unsigned char>(tag[name_end]))) ++name_end;
    const auto name = lower(tag.substr(closing ? 1 : 0, name_end - (closing ? 1 : 0)));

    if (!closing && (name == "script" || name == "style")) {
      const auto close = lower(html.substr(i)).find("</" + name);
      if (close == std::string::npos) throw ParseError("unterminated <" + name + "> element");
      const auto gt = html.find('>', i + close);
      if (gt == std::string_view::npos) throw ParseError("unterminated </" + name + "> tag");
      i = gt + 1;
      continue;
    }

    if (const int level = heading_level(name); level > 0) {
      if (!closing) {
        if (capture == Capture::text) flush(Event::Kind::text, 0);
        buffer.clear();
        capture = Capture::heading;
        open_heading = level;
      } else if (capture == Capture::heading) {
        flush(Event::Kind::heading, open_heading);
        capture = Capture::text;
      }
      continue;
    }
    if (name == "title") {
      if (!closing) {
        if (capture == Capture::text) flush(Event::Kind::text, 0);
        buffer.clear();
        capture = Capture::title;
      } else if (capture == Capture::title) {
        flush(Event::Kind::title, 0);
        capture = Capture::text;
      }
      continue;
    }
    if (is_block_tag(name)) buffer.push_back(' ');
  }
  if (capture == Capture::heading) {
    flush(Event::Kind::heading, open_heading);
  } else if (capture == Capture::text) {
    flush(Event::Kind::text, 0);
  }
  return events;
}

struct Draft {
  std::string label;
  int level = 0;
  std::vector<std::unique_ptr<Draft>> children;
};

std::string sanitize_label(std::string label) {
  for (auto pos = label.find(kPathSeparator); pos != std::string::npos; pos = label.find(kPathSeparator, pos)) {
    label.replace(pos, kPathSeparator.size(), "»");
  }
  if (!label.empty() && label.front() == '>') label.replace(0, 1, "›");
  if (!label.empty() && label.back() == '>') label.replace(label.size() - 1, 1, "›");
  return label;
}

Draft& add_child(Draft& parent, std::string label, int level) {
  label = sanitize_label(std::move(label));
  auto taken = [&](const std::string& candidate) {
    return std::any_of(parent.children.begin(), parent.children.end(),
                       [&](const auto& c) { return c->label == candidate; });
  };
  if (taken(label)) {
    for (int n = 2;; ++n) {
      auto candidate = label + " (" + std::to_string(n) + ")";
      if (!taken(candidate)) {
        label = std::move(candidate);
        break;
      }
    }
  }
  parent.children.push_back(std::make_unique<Draft>(Draft{std::move(label), level, {}}));
  return *parent.children.back();
}

TreeNode finish(Draft& draft) {
  TreeNode node{std::move(draft.label), {}};
  node.children.reserve(draft.children.size());
  for (auto& child : draft.children) node.children.push_back(finish(*child));
  return node;
}

}  // namespace

KnowledgeTree ingest_html_headings(std::string_view html) {
  const auto events = scan(html);

  std::optional<std::size_t> root_event;
  std::string root_label;
  for (std::size_t i = 0; i < events.size() && !root_event; ++i) {
    if (events[i].kind == Event::Kind::title) {
      root_event = i;
    }
  }
  const bool any_heading = std::any_of(events.begin(), events.end(),
                                       [](const Event& e) { return e.kind == Event::Kind::heading; });
  if (!any_heading) throw ValidationError("no h1-h6 headings found");
  if (!root_event) {
    for (std::size_t i = 0; i < events.size() && !root_event; ++i) {
      if (events[i].kind == Event::Kind::heading && events[i].level == 1) root_event = i;
    }
  }
  if (!root_event) {
    for (std::size_t i = 0; i < events.size() && !root_event; ++i) {
      if (events[i].kind == Event::Kind::heading) root_event = i;
    }
  }
  root_label = sanitize_label(events[*root_event].content);
  const bool title_root = events[*root_event].kind == Event::Kind::title;

  Draft root{root_label, 0, {}};
  std::vector<Draft*> stack{&root};
  bool merged_title_h1 = false;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& event = events[i];
    if (i == *root_event || event.kind == Event::Kind::title) continue;
    if (event.kind == Event::Kind::heading) {
      // <title>X</title> followed by <h1>X</h1> names the same root once.
      if (title_root && !merged_title_h1 && event.level == 1 && sanitize_label(event.content) == root_label &&
          stack.size() == 1 && root.children.empty()) {
        merged_title_h1 = true;
        continue;
      }
      while (stack.size() > 1 && stack.back()->level >= event.level) stack.pop_back();
      stack.push_back(&add_child(*stack.back(), event.content, event.level));
    } else {
      add_child(*stack.back(), event.content, 7);
    }
  }

  KnowledgeTree tree;
  tree.root = finish(root);
  tree.conference_id = tree.root.label;
  validate(tree);
  return tree;
}

}  // namespace starqa
