#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace psar {

// Plain-text configuration: one `key = value` pair per line, `#` comments.
class ConfigMap {
  public:
    ConfigMap() = default;

    static ConfigMap parse(std::istream& in) {
        ConfigMap cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            line_no += 1;
            std::string s = strip(line);
            if (s.empty() || s[0] == '#') continue;
            size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": expected 'key = value'");
            std::string key = strip(s.substr(0, eq));
            std::string value = strip(s.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static ConfigMap parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file: " + path);
        return parse(in);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw std::runtime_error("missing required config key: " + key);
        return it->second;
    }

    long long get_int(const std::string& key, long long fallback) const {
        if (!has(key)) return fallback;
        return to_int(key, values_.at(key));
    }

    long long require_int(const std::string& key) const { return to_int(key, require(key)); }

    double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return to_double(key, values_.at(key));
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = values_.at(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw std::runtime_error("config key '" + key + "': expected a boolean, got '" + v + "'");
    }

    // Comma-separated list values.
    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        if (!has(key)) return out;
        std::stringstream ss(values_.at(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            std::string t = strip(tok);
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }

    const std::map<std::string, std::string>& items() const { return values_; }

    std::string serialize() const {
        std::ostringstream out;
        for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
        return out.str();
    }

  private:
    static std::string strip(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static long long to_int(const std::string& key, const std::string& v) {
        size_t pos = 0;
        long long x = 0;
        try {
            x = std::stoll(v, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("config key '" + key + "': expected an integer, got '" + v + "'");
        }
        if (pos != v.size())
            throw std::runtime_error("config key '" + key + "': expected an integer, got '" + v + "'");
        return x;
    }

    static double to_double(const std::string& key, const std::string& v) {
        size_t pos = 0;
        double x = 0;
        try {
            x = std::stod(v, &pos);
        } catch (const std::exception&) {
            throw std::runtime_error("config key '" + key + "': expected a number, got '" + v + "'");
        }
        if (pos != v.size())
            throw std::runtime_error("config key '" + key + "': expected a number, got '" + v + "'");
        return x;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace psar
