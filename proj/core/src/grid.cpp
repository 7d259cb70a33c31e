#include "gridflux/grid.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace gridflux {
namespace {

std::string strip_comment(const std::string& line) {
    auto pos = line.find('%');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

bool parse_number(const std::string& tok, double& out) {
    const char* s = tok.c_str();
    char* end = nullptr;
    out = std::strtod(s, &end);
    return end != s && *end == '\0';
}

std::vector<std::string> tokens_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

/// One numeric row of a matrix assignment, with its source line for errors.
struct Row {
    std::vector<double> cols;
    std::size_t line;
};

using Matrix = std::vector<Row>;

double col(const Row& row, std::size_t idx) { return row.cols[idx]; }

void require_cols(const std::string& section, const Row& row, std::size_t at_least) {
    if (row.cols.size() < at_least)
        throw ParseError(section, row.line,
                         section + " row at line " + std::to_string(row.line) + " has " +
                             std::to_string(row.cols.size()) + " columns, expected >= " +
                             std::to_string(at_least));
}

}  // namespace

GridCase parse_matpower(std::istream& text, const std::string& name) {
    GridCase grid;
    grid.name = name;

    std::unordered_map<std::string, Matrix> matrices;
    bool have_base = false;

    std::string raw;
    std::size_t line_no = 0;
    std::string capturing;  // section currently inside [ ... ]
    while (std::getline(text, raw)) {
        ++line_no;
        std::string line = strip_comment(raw);

        if (capturing.empty()) {
            // look for `function mpc = <name>` or `mpc.<field> = ...`
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto lhs_toks = tokens_of(line.substr(0, eq));
            if (lhs_toks.size() == 3 && lhs_toks[0] == "function") {
                auto rhs = tokens_of(line.substr(eq + 1));
                if (!rhs.empty() && grid.name.empty()) grid.name = rhs[0];
                continue;
            }
            if (lhs_toks.size() != 1 || lhs_toks[0].rfind("mpc.", 0) != 0) continue;
            std::string field = lhs_toks[0].substr(4);
            std::string rhs = line.substr(eq + 1);

            if (field == "baseMVA") {
                auto toks = tokens_of(rhs);
                if (toks.empty())
                    throw ParseError("mpc.baseMVA", line_no, "missing baseMVA value");
                std::string tok = toks[0];
                if (!tok.empty() && tok.back() == ';') tok.pop_back();
                double v;
                if (!parse_number(tok, v))
                    throw ParseError("mpc.baseMVA", line_no, "bad baseMVA value: " + tok);
                grid.base_mva = v;
                have_base = true;
                continue;
            }
            auto bracket = rhs.find('[');
            if (bracket == std::string::npos) continue;  // scalar/string field, skip
            if (field != "bus" && field != "gen" && field != "branch") {
                // capture-and-discard unrecognized matrices (gencost etc.)
                field = "";
            }
            capturing = field.empty() ? "<skip>" : field;
            matrices[capturing];
            line = rhs.substr(bracket + 1);
            // fall through to row parsing for anything after '['
        }

        // inside a matrix: rows end at ';', the matrix ends at ']'
        bool closes = false;
        auto close = line.find(']');
        if (close != std::string::npos) {
            line = line.substr(0, close);
            closes = true;
        }
        std::istringstream seg_stream(line);
        std::string segment;
        while (std::getline(seg_stream, segment, ';')) {
            auto toks = tokens_of(segment);
            if (toks.empty()) continue;
            Row row{{}, line_no};
            row.cols.reserve(toks.size());
            for (const auto& tok : toks) {
                double v;
                if (!parse_number(tok, v))
                    throw ParseError("mpc." + capturing, line_no,
                                     "bad numeric value '" + tok + "' at line " +
                                         std::to_string(line_no));
                row.cols.push_back(v);
            }
            matrices[capturing].push_back(std::move(row));
        }
        if (closes) capturing.clear();
    }

    if (!have_base)
        throw ParseError("mpc.baseMVA", 0, "missing required section mpc.baseMVA");
    for (const char* sec : {"bus", "gen", "branch"})
        if (matrices.find(sec) == matrices.end())
            throw ParseError(std::string("mpc.") + sec, 0,
                             std::string("missing required section mpc.") + sec);
    if (grid.base_mva <= 0)
        throw ValidationError("baseMVA must be positive");

    int slack_count = 0;
    for (const Row& row : matrices["bus"]) {
        require_cols("mpc.bus", row, 13);
        BusRecord b;
        b.id = static_cast<int>(col(row, 0));
        int type = static_cast<int>(col(row, 1));
        if (type < 1 || type > 3)
            throw ValidationError("bus " + std::to_string(b.id) + ": unsupported type " +
                                  std::to_string(type));
        b.bus_type = static_cast<BusType>(type);
        if (b.bus_type == BusType::Slack) ++slack_count;
        b.pd = col(row, 2);
        b.qd = col(row, 3);
        b.gs = col(row, 4);
        b.bs = col(row, 5);
        b.vm_init = col(row, 7);
        b.va_init = col(row, 8);
        grid.buses.push_back(b);
    }
    if (slack_count != 1)
        throw ValidationError("expected exactly one slack bus, found " +
                              std::to_string(slack_count));

    for (const Row& row : matrices["gen"]) {
        require_cols("mpc.gen", row, 8);
        GenRecord g;
        g.bus_id = static_cast<int>(col(row, 0));
        g.pg = col(row, 1);
        g.qg = col(row, 2);
        g.vg = col(row, 5);
        g.in_service = col(row, 7) > 0;
        if (g.in_service) grid.generators.push_back(g);  // out-of-service units dropped
    }

    for (const Row& row : matrices["branch"]) {
        require_cols("mpc.branch", row, 11);
        BranchRecord br;
        br.from_bus = static_cast<int>(col(row, 0));
        br.to_bus = static_cast<int>(col(row, 1));
        br.r = col(row, 2);
        br.x = col(row, 3);
        br.b_charging = col(row, 4);
        br.tap = col(row, 8);
        br.shift = col(row, 9);
        br.in_service = col(row, 10) > 0;
        if (br.in_service) grid.branches.push_back(br);
    }

    // setpoint disagreement between co-located generators is worth flagging
    std::unordered_map<int, double> first_vg;
    for (const GenRecord& g : grid.generators) {
        auto [it, inserted] = first_vg.try_emplace(g.bus_id, g.vg);
        if (!inserted && std::abs(it->second - g.vg) > 1e-6)
            grid.warnings.push_back("bus " + std::to_string(g.bus_id) +
                                    ": generator setpoints disagree (" +
                                    std::to_string(it->second) + " vs " +
                                    std::to_string(g.vg) + "); using the first");
    }
    return grid;
}

GridCase parse_matpower_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open case file: " + path);
    return parse_matpower(in, std::filesystem::path(path).stem().string());
}

void emit_matpower(const GridCase& grid, std::ostream& out) {
    out.precision(17);
    out << "function mpc = " << (grid.name.empty() ? "case_unnamed" : grid.name) << "\n";
    out << "mpc.version = '2';\n";
    out << "mpc.baseMVA = " << grid.base_mva << ";\n";
    out << "mpc.bus = [\n";
    for (const BusRecord& b : grid.buses)
        out << "\t" << b.id << "\t" << static_cast<int>(b.bus_type) << "\t" << b.pd
            << "\t" << b.qd << "\t" << b.gs << "\t" << b.bs << "\t1\t" << b.vm_init
            << "\t" << b.va_init << "\t0\t1\t1.1\t0.9;\n";
    out << "];\n";
    out << "mpc.gen = [\n";
    for (const GenRecord& g : grid.generators)
        out << "\t" << g.bus_id << "\t" << g.pg << "\t" << g.qg << "\t0\t0\t" << g.vg
            << "\t" << grid.base_mva << "\t" << (g.in_service ? 1 : 0) << ";\n";
    out << "];\n";
    out << "mpc.branch = [\n";
    for (const BranchRecord& br : grid.branches)
        out << "\t" << br.from_bus << "\t" << br.to_bus << "\t" << br.r << "\t" << br.x
            << "\t" << br.b_charging << "\t0\t0\t0\t" << br.tap << "\t" << br.shift
            << "\t" << (br.in_service ? 1 : 0) << ";\n";
    out << "];\n";
}

std::vector<cxd> injections_per_unit(const GridCase& grid) {
    std::unordered_map<int, std::size_t> index_of;
    for (std::size_t i = 0; i < grid.buses.size(); ++i)
        index_of[grid.buses[i].id] = i;

    std::vector<cxd> s(grid.buses.size(), cxd{0.0, 0.0});
    for (std::size_t i = 0; i < grid.buses.size(); ++i)
        s[i] -= cxd{grid.buses[i].pd, grid.buses[i].qd};
    for (const GenRecord& g : grid.generators) {
        auto it = index_of.find(g.bus_id);
        if (it == index_of.end())
            throw ValidationError("generator references unknown bus " +
                                  std::to_string(g.bus_id));
        s[it->second] += cxd{g.pg, g.qg};
    }
    for (cxd& v : s) v /= grid.base_mva;
    return s;
}

PowerFlowProblem build_problem(const GridCase& grid) {
    const std::size_t n = grid.buses.size();
    std::unordered_map<int, std::size_t> index_of;
    index_of.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = index_of.try_emplace(grid.buses[i].id, i);
        if (!inserted)
            throw ValidationError("duplicate bus id " + std::to_string(grid.buses[i].id));
    }

    TripletBuilder builder(n, n);
    builder.reserve(4 * grid.branches.size() + n);
    std::vector<ReactanceEdge> p_edges;
    p_edges.reserve(grid.branches.size());
    for (const BranchRecord& br : grid.branches) {
        auto fit = index_of.find(br.from_bus);
        auto tit = index_of.find(br.to_bus);
        if (fit == index_of.end() || tit == index_of.end())
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + " references unknown bus");
        if (br.r == 0.0 && br.x == 0.0)
            throw ValidationError("branch " + std::to_string(br.from_bus) + "-" +
                                  std::to_string(br.to_bus) + " has r = x = 0");
        const std::size_t f = fit->second, t = tit->second;
        const cxd ys = 1.0 / cxd{br.r, br.x};
        const cxd ysh{0.0, br.b_charging / 2.0};
        const double tau = br.tap == 0.0 ? 1.0 : br.tap;
        const double shift_rad = br.shift * std::numbers::pi / 180.0;
        const cxd rot = std::polar(1.0, shift_rad);

        builder.add(f, f, (ys + ysh) / (tau * tau));
        builder.add(f, t, -ys / (tau * std::conj(rot)));
        builder.add(t, f, -ys / (tau * rot));
        builder.add(t, t, ys + ysh);
        p_edges.push_back({f, t, br.x});
    }
    for (std::size_t i = 0; i < n; ++i)
        if (grid.buses[i].gs != 0.0 || grid.buses[i].bs != 0.0)
            builder.add(i, i, cxd{grid.buses[i].gs, grid.buses[i].bs} / grid.base_mva);

    PowerFlowProblem p;
    p.name = grid.name;
    p.y_bus = builder.build();
    p.s_bus = injections_per_unit(grid);
    p.edges = std::move(p_edges);
    p.vm_setpoint.assign(n, 1.0);
    p.external_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.external_ids[i] = grid.buses[i].id;

    // first in-service generator per bus decides the setpoint
    std::unordered_map<std::size_t, const GenRecord*> gen_at;
    for (const GenRecord& g : grid.generators)
        gen_at.try_emplace(index_of.at(g.bus_id), &g);

    bool slack_seen = false;
    for (std::size_t i = 0; i < n; ++i) {
        const BusRecord& b = grid.buses[i];
        auto git = gen_at.find(i);
        switch (b.bus_type) {
            case BusType::Slack:
                if (slack_seen) throw ValidationError("multiple slack buses");
                slack_seen = true;
                p.slack = i;
                p.vm_setpoint[i] = git != gen_at.end() ? git->second->vg : b.vm_init;
                break;
            case BusType::PV:
                if (git == gen_at.end()) {
                    p.pq.push_back(i);  // no generator left: behaves as a load bus
                } else {
                    p.pv.push_back(i);
                    p.vm_setpoint[i] = git->second->vg;
                }
                break;
            case BusType::PQ:
                p.pq.push_back(i);
                break;
        }
    }
    if (!slack_seen) throw ValidationError("no slack bus");
    for (std::size_t i : p.pv)
        if (p.vm_setpoint[i] <= 0)
            throw ValidationError("non-positive voltage setpoint at bus " +
                                  std::to_string(p.external_ids[i]));
    return p;
}

}  // namespace gridflux
