/*
 Copyright 2026 The deepc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "deepc/bench/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

namespace deepc::bench {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

double parse_double(const std::string& text, const std::string& what)
{
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") return kInf;
    if (t == "-inf") return -kInf;
    double value = 0.0;
    const char* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (t.empty() || ec != std::errc() || ptr != end || std::isnan(value)) {
        throw ParseError(what + ": expected a number, got '" + text + "'");
    }
    return value;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what)
{
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        out.push_back(parse_double(item, what));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

Config Config::parse(std::istream& is, const std::string& origin)
{
    Config cfg;
    std::string line;
    int number = 0;
    while (std::getline(is, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(number) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ParseError(origin + ":" + std::to_string(number) + ": empty key");
        cfg.values_[key] = trim(t.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path.string());
    return parse(in, path.string());
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const
{
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double(it->second, key);
}

Index Config::get_index(const std::string& key, Index fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long value = 0;
    const std::string& t = it->second;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError(key + ": expected an integer, got '" + t + "'");
    }
    return static_cast<Index>(value);
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t value = 0;
    const std::string& t = it->second;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError(key + ": expected an unsigned integer, got '" + t + "'");
    }
    return value;
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ParseError(key + ": expected true or false, got '" + it->second + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const
{
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : parse_double_list(it->second, key);
}

void Config::require_known(const std::set<std::string>& known) const
{
    for (const auto& [key, value] : values_) {
        if (!known.count(key)) throw ParseError("unknown config key '" + key + "'");
    }
}

} // namespace deepc::bench
