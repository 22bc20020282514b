#pragma once

// Typed access over a parsed sectioned key = value file.

#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <string>

namespace mixtrack::ini {

class Document {
public:
  static Document parse(std::istream& in, const std::string& source);

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  /// Section names, in file order.
  std::vector<std::string> sections() const;

  double real(const std::string& section, const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& section, const std::string& key, std::int64_t fallback) const;
  std::string text(const std::string& section, const std::string& key, const std::string& fallback) const;

  /// Rejects keys outside the allowed set for a section.
  void check_keys(const std::string& section, const std::set<std::string>& allowed) const;

  const std::string& source() const { return source_; }

private:
  std::string raw(const std::string& section, const std::string& key) const;

  boost::property_tree::ptree tree_;
  std::string source_;
};

}  // namespace mixtrack::ini
