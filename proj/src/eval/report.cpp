#include "rawmix/eval/report.hpp"

#include "rawmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rawmix {
namespace {

void check_complete(std::span<const EvalReport> reports)
{
    if (reports.empty())
        fail(ErrorKind::data, "no reports to emit");
    for (const auto& r : reports) {
        if (r.per_class.empty())
            fail(ErrorKind::data, "report '" + r.name + "' has an empty per-class list");
        for (const auto& ir : r.results)
            if (ir.per_class.empty())
                fail(ErrorKind::data, "report '" + r.name + "' has an empty per-class list for '" +
                                          ir.illuminant + "'");
    }
}

std::vector<std::string> test_illuminants(std::span<const EvalReport> reports)
{
    std::vector<std::string> names;
    for (const auto& r : reports)
        for (const auto& ir : r.results)
            if (std::find(names.begin(), names.end(), ir.illuminant) == names.end())
                names.push_back(ir.illuminant);
    return names;
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

ReportFormat report_format_from_string(std::string_view s)
{
    if (s == "csv")
        return ReportFormat::csv;
    if (s == "json")
        return ReportFormat::json;
    if (s == "svg")
        return ReportFormat::svg;
    fail(ErrorKind::config, "unknown report format '" + std::string(s) + "' (csv, json or svg)");
}

std::string_view to_string(ReportFormat f)
{
    switch (f) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::json: return "json";
    case ReportFormat::svg: return "svg";
    }
    return "?";
}

std::string report_csv(std::span<const EvalReport> reports)
{
    const auto names = test_illuminants(reports);
    std::ostringstream os;
    os << "descriptor,msfa,patch_size";
    for (const auto& n : names)
        os << ",acc_" << n;
    os << '\n';
    os << std::setprecision(6);
    for (const auto& r : reports) {
        os << r.descriptor << ',' << r.msfa << ',' << r.patch_size;
        for (const auto& n : names) {
            os << ',';
            auto it = std::find_if(r.results.begin(), r.results.end(),
                                   [&](const IlluminantResult& ir) { return ir.illuminant == n; });
            if (it != r.results.end())
                os << it->accuracy;
        }
        os << '\n';
    }
    return os.str();
}

std::string report_json(std::span<const EvalReport> reports)
{
    if (reports.size() == 1)
        return reports[0].to_json().dump(2) + "\n";
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports)
        arr.push_back(r.to_json());
    return arr.dump(2) + "\n";
}

std::string report_svg(std::span<const EvalReport> reports)
{
    constexpr double W = 640, H = 420, L = 70, R = 20, T = 30, B = 60;
    double tmax = 0;
    for (const auto& r : reports)
        for (const auto& ir : r.results)
            tmax = std::max(tmax, ir.extract_seconds);
    tmax = tmax > 0 ? tmax * 1.1 : 1.0;
    auto px = [&](double t) { return L + (W - L - R) * t / tmax; };
    auto py = [&](double acc) { return H - B - (H - T - B) * acc / 100.0; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
       << "\" stroke=\"black\"/>\n";
    for (int a = 0; a <= 100; a += 20)
        os << "<text x=\"" << L - 8 << "\" y=\"" << py(a) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
           << a << "</text>\n";
    for (int i = 0; i <= 4; ++i)
        os << "<text x=\"" << px(tmax * i / 4) << "\" y=\"" << H - B + 16
           << "\" font-size=\"11\" text-anchor=\"middle\">" << std::setprecision(3) << tmax * i / 4
           << std::setprecision(2) << "</text>\n";
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
       << "\" font-size=\"13\" text-anchor=\"middle\">feature extraction time (s)</text>\n";
    os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">1-NN accuracy (%)</text>\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        const char* color = palette[i % std::size(palette)];
        for (const auto& ir : r.results) {
            os << "<circle cx=\"" << px(ir.extract_seconds) << "\" cy=\"" << py(ir.accuracy)
               << "\" r=\"5\" fill=\"" << color << "\"><title>" << xml_escape(r.name) << " / "
               << xml_escape(ir.illuminant) << ": " << ir.accuracy << "%</title></circle>\n";
            os << "<text x=\"" << px(ir.extract_seconds) + 7 << "\" y=\"" << py(ir.accuracy) - 6
               << "\" font-size=\"10\">" << xml_escape(r.descriptor + " " + ir.illuminant) << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

void emit_report(std::span<const EvalReport> reports, ReportFormat format, const std::filesystem::path& path)
{
    check_complete(reports);
    std::string body;
    switch (format) {
    case ReportFormat::csv: body = report_csv(reports); break;
    case ReportFormat::json: body = report_json(reports); break;
    case ReportFormat::svg: body = report_svg(reports); break;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << body) || !f.flush())
        fail(ErrorKind::io, "cannot write report '" + path.string() + "'");
}

std::vector<EvalReport> load_reports(const std::filesystem::path& json_path)
{
    std::ifstream f(json_path);
    if (!f)
        fail(ErrorKind::io, "cannot open '" + json_path.string() + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, "'" + json_path.string() + "' is not valid JSON: " + e.what());
    }
    std::vector<EvalReport> out;
    if (j.is_array())
        for (const auto& x : j)
            out.push_back(EvalReport::from_json(x));
    else
        out.push_back(EvalReport::from_json(j));
    return out;
}

} // namespace rawmix
