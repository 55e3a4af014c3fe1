#include "toml_lite.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace elmap::cli {

double TomlValue::as_number() const {
  if (kind != Kind::number) {
    throw ConfigError(line, "expected a number");
  }
  return num;
}

long TomlValue::as_integer() const {
  const double v = as_number();
  const long i = static_cast<long>(v);
  if (static_cast<double>(i) != v) {
    throw ConfigError(line, "expected an integer");
  }
  return i;
}

bool TomlValue::as_bool() const {
  if (kind != Kind::boolean) {
    throw ConfigError(line, "expected true or false");
  }
  return boolean;
}

const std::string& TomlValue::as_string() const {
  if (kind != Kind::string) {
    throw ConfigError(line, "expected a quoted string");
  }
  return str;
}

std::vector<double> TomlValue::as_number_array() const {
  if (kind != Kind::array) {
    throw ConfigError(line, "expected an array");
  }
  std::vector<double> out;
  for (const TomlValue& v : arr) {
    out.push_back(v.as_number());
  }
  return out;
}

std::vector<std::string> TomlValue::as_string_array() const {
  if (kind != Kind::array) {
    throw ConfigError(line, "expected an array");
  }
  std::vector<std::string> out;
  for (const TomlValue& v : arr) {
    out.push_back(v.as_string());
  }
  return out;
}

const TomlTable* TomlDoc::table(const std::string& name) const {
  const auto it = tables.find(name);
  return it == tables.end() ? nullptr : &it->second;
}

const std::vector<TomlTable>* TomlDoc::list(const std::string& name) const {
  const auto it = lists.find(name);
  return it == lists.end() ? nullptr : &it->second;
}

namespace {

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  int line = 1;

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }
  char take() {
    const char c = s[pos++];
    if (c == '\n') {
      ++line;
    }
    return c;
  }
  void skip_ws_inline() {
    while (!done() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) {
      take();
    }
  }
};

TomlValue parse_value(Cursor& c);

TomlValue parse_array(Cursor& c) {
  TomlValue v;
  v.kind = TomlValue::Kind::array;
  v.line = c.line;
  c.take();  // consume '['
  while (true) {
    c.skip_ws_inline();
    while (!c.done() && c.peek() == '\n') {  // arrays may span lines
      c.take();
      c.skip_ws_inline();
    }
    if (c.done()) {
      throw ConfigError(c.line, "unterminated array");
    }
    if (c.peek() == ']') {
      c.take();
      break;
    }
    v.arr.push_back(parse_value(c));
    c.skip_ws_inline();
    while (!c.done() && c.peek() == '\n') {
      c.take();
      c.skip_ws_inline();
    }
    if (!c.done() && c.peek() == ',') {
      c.take();
    } else if (!c.done() && c.peek() == ']') {
      c.take();
      break;
    } else if (c.done()) {
      throw ConfigError(c.line, "unterminated array");
    } else {
      throw ConfigError(c.line, "expected ',' or ']' in array");
    }
  }
  return v;
}

TomlValue parse_value(Cursor& c) {
  c.skip_ws_inline();
  if (c.done()) {
    throw ConfigError(c.line, "missing value");
  }
  TomlValue v;
  v.line = c.line;
  const char ch = c.peek();
  if (ch == '[') {
    return parse_array(c);
  }
  if (ch == '"') {
    c.take();
    v.kind = TomlValue::Kind::string;
    while (!c.done() && c.peek() != '"') {
      char t = c.take();
      if (t == '\\' && !c.done()) {
        const char esc = c.take();
        switch (esc) {
          case 'n': t = '\n'; break;
          case 't': t = '\t'; break;
          case '"': t = '"'; break;
          case '\\': t = '\\'; break;
          default:
            throw ConfigError(c.line, "unknown escape in string");
        }
      }
      v.str.push_back(t);
    }
    if (c.done()) {
      throw ConfigError(c.line, "unterminated string");
    }
    c.take();  // closing quote
    return v;
  }
  // bare token: number or boolean
  std::string tok;
  while (!c.done() && c.peek() != '\n' && c.peek() != ',' && c.peek() != ']' &&
         c.peek() != '#' && c.peek() != ' ' && c.peek() != '\t' && c.peek() != '\r') {
    tok.push_back(c.take());
  }
  if (tok == "true" || tok == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.boolean = tok == "true";
    return v;
  }
  char* end = nullptr;
  v.num = std::strtod(tok.c_str(), &end);
  if (tok.empty() || end != tok.c_str() + tok.size()) {
    throw ConfigError(v.line, "cannot parse value '" + tok + "'");
  }
  v.kind = TomlValue::Kind::number;
  return v;
}

void strip_comment(std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      line.erase(i);
      return;
    }
  }
}

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) {
    ++a;
  }
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) {
    --b;
  }
  return s.substr(a, b - a);
}

bool valid_key(const std::string& k) {
  if (k.empty()) {
    return false;
  }
  for (char c : k) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') {
      return false;
    }
  }
  return true;
}

}  // namespace

TomlDoc parse_toml(const std::string& text) {
  TomlDoc doc;
  TomlTable* current = &doc.root;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::string pending;  // multi-line value accumulation (arrays)
  std::string pending_key;
  int pending_line = 0;

  auto finish_pending = [&]() {
    if (pending_key.empty()) {
      return;
    }
    Cursor c{pending, 0, pending_line};
    const TomlValue v = parse_value(c);
    c.skip_ws_inline();
    if (!c.done()) {
      throw ConfigError(c.line, "trailing characters after value");
    }
    (*current)[pending_key] = v;
    pending_key.clear();
    pending.clear();
  };

  auto balanced = [](const std::string& s) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      if (c == '"' && (i == 0 || s[i - 1] != '\\')) {
        in_string = !in_string;
      } else if (!in_string && c == '[') {
        ++depth;
      } else if (!in_string && c == ']') {
        --depth;
      }
    }
    return depth <= 0;
  };

  while (std::getline(in, raw)) {
    ++line_no;
    strip_comment(raw);
    const std::string line = trim(raw);

    if (!pending_key.empty()) {
      pending += "\n" + raw;
      if (balanced(pending)) {
        finish_pending();
      }
      continue;
    }
    if (line.empty()) {
      continue;
    }

    if (line.front() == '[') {
      const bool is_list = line.size() > 1 && line[1] == '[';
      const std::string closer = is_list ? "]]" : "]";
      const std::size_t close = line.find(closer);
      if (close == std::string::npos || close + closer.size() != line.size()) {
        throw ConfigError(line_no, "malformed table header");
      }
      const std::string name =
          trim(line.substr(is_list ? 2 : 1, close - (is_list ? 2 : 1)));
      if (!valid_key(name)) {
        throw ConfigError(line_no, "bad table name '" + name + "'");
      }
      if (is_list) {
        doc.lists[name].emplace_back();
        current = &doc.lists[name].back();
      } else {
        current = &doc.tables[name];
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line_no, "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) {
      throw ConfigError(line_no, "bad key '" + key + "'");
    }
    const std::string rhs = trim(line.substr(eq + 1));
    if (rhs.empty()) {
      throw ConfigError(line_no, "missing value for key '" + key + "'");
    }
    if (balanced(rhs)) {
      Cursor c{rhs, 0, line_no};
      const TomlValue v = parse_value(c);
      c.skip_ws_inline();
      if (!c.done()) {
        throw ConfigError(line_no, "trailing characters after value");
      }
      (*current)[key] = v;
    } else {
      pending_key = key;
      pending = rhs;
      pending_line = line_no;
    }
  }
  if (!pending_key.empty()) {
    throw ConfigError(pending_line, "unterminated value for key '" + pending_key + "'");
  }
  return doc;
}

TomlDoc parse_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(0, "cannot open config file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

}  // namespace elmap::cli
