#include "perpetua/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace perpetua::cli {

using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    return s;
}

struct Curve {
    std::string name;
    std::vector<double> t, est, lo, hi;
};

bool looks_like_curve(const json& v) {
    if (!v.is_array() || v.empty()) return false;
    const auto& first = v.front();
    return first.is_object() && first.contains("t") &&
           first.contains("estimate") && first.contains("lo") &&
           first.contains("hi");
}

void write_curve_csv(const Curve& c, const std::string& path) {
    std::ofstream os(path);
    os << "t,estimate,lo,hi\n";
    for (size_t i = 0; i < c.t.size(); ++i)
        os << num(c.t[i]) << ',' << num(c.est[i]) << ',' << num(c.lo[i]) << ','
           << num(c.hi[i]) << "\n";
}

void write_curve_svg(const Curve& c, const std::string& path) {
    constexpr double W = 640, H = 400, ML = 60, MR = 20, MT = 20, MB = 40;
    double tmin = c.t.front(), tmax = c.t.back();
    double ymin = 0, ymax = 0;
    for (size_t i = 0; i < c.t.size(); ++i) {
        ymin = std::min({ymin, c.lo[i]});
        ymax = std::max({ymax, c.hi[i], c.est[i]});
    }
    if (ymax == ymin) ymax = ymin + 1;
    if (tmax == tmin) tmax = tmin + 1;
    const auto px = [&](double t) {
        return ML + (t - tmin) / (tmax - tmin) * (W - ML - MR);
    };
    const auto py = [&](double y) {
        return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);
    };
    std::ofstream os(path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W)
       << "\" height=\"" << num(H) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // confidence band
    os << "<path fill=\"#c8d8f0\" stroke=\"none\" d=\"M";
    for (size_t i = 0; i < c.t.size(); ++i)
        os << num(px(c.t[i])) << ' ' << num(py(c.lo[i])) << (i + 1 < c.t.size() ? " L" : " ");
    for (size_t i = c.t.size(); i-- > 0;)
        os << "L" << num(px(c.t[i])) << ' ' << num(py(c.hi[i])) << ' ';
    os << "Z\"/>\n";
    // estimate polyline
    os << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < c.t.size(); ++i)
        os << num(px(c.t[i])) << ',' << num(py(c.est[i])) << ' ';
    os << "\"/>\n";
    // axes
    os << "<line x1=\"" << num(ML) << "\" y1=\"" << num(H - MB) << "\" x2=\""
       << num(W - MR) << "\" y2=\"" << num(H - MB)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << num(ML) << "\" y1=\"" << num(MT) << "\" x2=\""
       << num(ML) << "\" y2=\"" << num(H - MB) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(ML) << "\" y=\"" << num(H - 10)
       << "\" font-size=\"12\">" << num(tmin) << "</text>\n";
    os << "<text x=\"" << num(W - MR - 40) << "\" y=\"" << num(H - 10)
       << "\" font-size=\"12\">" << num(tmax) << "</text>\n";
    os << "<text x=\"4\" y=\"" << num(H - MB) << "\" font-size=\"12\">"
       << num(ymin) << "</text>\n";
    os << "<text x=\"4\" y=\"" << num(MT + 10) << "\" font-size=\"12\">"
       << num(ymax) << "</text>\n";
    os << "<text x=\"" << num(ML + 8) << "\" y=\"" << num(MT + 10)
       << "\" font-size=\"12\">" << c.name << "</text>\n";
    os << "</svg>\n";
}

}  // namespace

int report_results(const std::string& results_path, const std::string& out_dir,
                   const std::string& format) {
    std::ifstream in(results_path);
    if (!in) return 2;
    std::vector<json> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(json::parse(line));
        } catch (const std::exception&) {
            return 2;
        }
    }
    std::filesystem::create_directories(out_dir);
    const bool want_csv = format == "csv" || format == "both";
    const bool want_svg = format == "svg" || format == "both";

    {
        std::ofstream os(out_dir + "/summary.csv");
        os << "experiment,law,tag,n,estimate,ci_lo,ci_hi,pass\n";
        for (const auto& r : records) {
            const auto getstr = [&](const char* k) {
                return r.contains(k) && r.at(k).is_string()
                           ? r.at(k).get<std::string>()
                           : std::string();
            };
            const auto getnum = [&](const char* k) -> std::string {
                if (!r.contains(k) || !r.at(k).is_number()) return "";
                return num(r.at(k).get<double>());
            };
            std::string ci_lo, ci_hi;
            if (r.contains("ci") && r.at("ci").is_array() &&
                r.at("ci").size() == 2) {
                if (r.at("ci")[0].is_number())
                    ci_lo = num(r.at("ci")[0].get<double>());
                if (r.at("ci")[1].is_number())
                    ci_hi = num(r.at("ci")[1].get<double>());
            }
            os << getstr("experiment") << ',' << getstr("law") << ','
               << getstr("tag") << ',' << getnum("n") << ','
               << getnum("estimate") << ',' << ci_lo << ',' << ci_hi << ','
               << (r.contains("pass") && r.at("pass").is_boolean()
                       ? (r.at("pass").get<bool>() ? "true" : "false")
                       : "")
               << "\n";
        }
    }

    size_t idx = 0;
    for (const auto& r : records) {
        for (const auto& [key, value] : r.items()) {
            if (!looks_like_curve(value)) continue;
            Curve c;
            c.name = key;
            for (const auto& p : value) {
                c.t.push_back(p.at("t").get<double>());
                c.est.push_back(p.at("estimate").get<double>());
                c.lo.push_back(p.at("lo").get<double>());
                c.hi.push_back(p.at("hi").get<double>());
            }
            const std::string stem = out_dir + "/curve_" + std::to_string(idx) +
                                     "_" + sanitize(key);
            if (want_csv) write_curve_csv(c, stem + ".csv");
            if (want_svg) write_curve_svg(c, stem + ".svg");
        }
        ++idx;
    }
    return 0;
}

}  // namespace perpetua::cli
