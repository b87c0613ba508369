#include "sda/util.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace sda {

std::string hex64(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path.string());
  uint64_t h = kFnvOffset;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a_bytes(buf, static_cast<size_t>(in.gcount()), h);
  }
  return h;
}

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  auto is_punct = [](unsigned char c) { return std::ispunct(c) != 0; };
  bool cur_punct = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
      continue;
    }
    bool punct = is_punct(c);
    if (!cur.empty() && punct != cur_punct) flush();
    cur_punct = punct;
    cur.push_back(static_cast<char>(c));
  }
  flush();
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens,
                        const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << content;
}

}  // namespace sda
