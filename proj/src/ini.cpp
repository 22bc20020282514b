#include "mixtrack/ini.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include "mixtrack/error.hpp"
#include "mixtrack/textio.hpp"

namespace mixtrack::ini {

namespace pt = boost::property_tree;

Document Document::parse(std::istream& in, const std::string& source) {
  Document doc;
  doc.source_ = source;
  try {
    pt::read_ini(in, doc.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(source, e.line(), e.message());
  }
  for (const auto& [name, child] : doc.tree_) {
    if (child.empty() && !child.data().empty()) throw ValidationError(source + ": key '" + name + "' outside any section");
  }
  return doc;
}

bool Document::has_section(const std::string& section) const { return tree_.find(section) != tree_.not_found(); }

bool Document::has(const std::string& section, const std::string& key) const {
  const auto it = tree_.find(section);
  return it != tree_.not_found() && it->second.find(key) != it->second.not_found();
}

std::vector<std::string> Document::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, child] : tree_) out.push_back(name);
  return out;
}

std::string Document::raw(const std::string& section, const std::string& key) const {
  // Section names such as "agent.1" contain the default path separator.
  const pt::ptree::path_type section_path(section, '\0');
  const pt::ptree::path_type key_path(key, '\0');
  return std::string(textio::trim(tree_.get_child(section_path).get_child(key_path).data()));
}

double Document::real(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  double v = 0.0;
  const auto s = raw(section, key);
  if (!textio::parse_real(s, v)) throw ValidationError(source_ + ": [" + section + "] " + key + ": '" + s + "' is not a number");
  return v;
}

std::int64_t Document::integer(const std::string& section, const std::string& key, std::int64_t fallback) const {
  if (!has(section, key)) return fallback;
  std::int64_t v = 0;
  const auto s = raw(section, key);
  if (!textio::parse_int(s, v)) throw ValidationError(source_ + ": [" + section + "] " + key + ": '" + s + "' is not an integer");
  return v;
}

std::string Document::text(const std::string& section, const std::string& key, const std::string& fallback) const {
  return has(section, key) ? raw(section, key) : fallback;
}

void Document::check_keys(const std::string& section, const std::set<std::string>& allowed) const {
  const auto it = tree_.find(section);
  if (it == tree_.not_found()) return;
  for (const auto& [key, value] : it->second) {
    if (!allowed.count(key)) throw ValidationError(source_ + ": unknown key '" + key + "' in [" + section + "]");
  }
}

}  // namespace mixtrack::ini
