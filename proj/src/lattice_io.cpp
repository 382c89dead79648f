// SPDX-License-Identifier: Apache-2.0
#include <symlat/errors.hpp>
#include <symlat/lattice_io.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

namespace symlat
{

using nlohmann::json;

namespace
{

double require_number(const json& j, const char* what)
{
    if (!j.is_number())
        throw ValidationError(std::string(what) + " must be a number");
    return j.get<double>();
}

Vec3 require_vec3(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3)
        throw ValidationError(std::string(what) + " must be an array of 3 numbers");
    return { require_number(j[0], what), require_number(j[1], what), require_number(j[2], what) };
}

int require_index(const json& j)
{
    if (!j.is_number_integer())
        throw ValidationError("edge endpoints must be integers");
    const auto v = j.get<long long>();
    if (v < 0 || v > std::numeric_limits<int>::max())
        throw ValidationError("edge endpoint " + std::to_string(v) + " out of range");
    return static_cast<int>(v);
}

std::string shortest(double v)
{
    return json(v).dump();
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s)
{
    auto out = std::string(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

// Splits "(a, b, c)" into its comma-separated fields; empty on bad shape.
std::vector<std::string_view> tuple_fields(std::string_view line)
{
    if (line.size() < 2 || line.front() != '(' || line.back() != ')')
        return {};
    auto body = line.substr(1, line.size() - 2);
    auto out = std::vector<std::string_view>();
    while (true)
    {
        const auto comma = body.find(',');
        out.push_back(trim(body.substr(0, comma)));
        if (comma == std::string_view::npos)
            break;
        body.remove_prefix(comma + 1);
    }
    return out;
}

bool parse_double(std::string_view s, double& out)
{
    const auto str = std::string(s);
    char* end = nullptr;
    out = std::strtod(str.c_str(), &end);
    return !str.empty() && end == str.c_str() + str.size() && std::isfinite(out);
}

bool parse_int(std::string_view s, int& out)
{
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace

json properties_to_json(const PropertyVector& properties)
{
    auto j = json::object();
    for (std::size_t k = 0; k < properties.names.size(); ++k)
        j[properties.names[k]] = properties.values[static_cast<Eigen::Index>(k)];
    return j;
}

PropertyVector properties_from_json(const json& j)
{
    if (!j.is_object())
        throw ValidationError("properties must be an object");

    const auto& standard = PropertyVector::standard_names();
    auto names = std::vector<std::string>();
    for (const auto& name: standard)
        if (j.contains(name))
            names.push_back(name);
    auto extra = std::vector<std::string>();
    for (const auto& [key, _]: j.items())
        if (std::find(standard.begin(), standard.end(), key) == standard.end())
            extra.push_back(key);
    std::sort(extra.begin(), extra.end());
    names.insert(names.end(), extra.begin(), extra.end());

    auto values = Eigen::VectorXd(static_cast<Eigen::Index>(names.size()));
    for (std::size_t k = 0; k < names.size(); ++k)
        values[static_cast<Eigen::Index>(k)] = require_number(j.at(names[k]), "property value");
    return { std::move(names), std::move(values) };
}

Lattice lattice_from_json(const json& j)
{
    if (!j.is_object())
        throw ValidationError("lattice document must be a JSON object");

    static const auto allowed = std::vector<std::string> { "name", "lattice_vectors", "nodes", "edges", "properties" };
    for (const auto& [key, _]: j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError("unknown lattice field '" + key + "'");

    for (const auto* key: { "lattice_vectors", "nodes", "edges" })
        if (!j.contains(key))
            throw ValidationError(std::string("missing field '") + key + "'");

    const auto& lv = j.at("lattice_vectors");
    if (!lv.is_array() || lv.size() != 3)
        throw ValidationError("lattice_vectors must be a 3x3 array");
    auto vectors = Mat3();
    for (int r = 0; r < 3; ++r)
        vectors.row(r) = require_vec3(lv[r], "lattice vector").transpose();

    const auto& jn = j.at("nodes");
    if (!jn.is_array())
        throw ValidationError("nodes must be an array");
    auto nodes = std::vector<Vec3>();
    for (const auto& p: jn)
        nodes.push_back(require_vec3(p, "node"));

    const auto& je = j.at("edges");
    if (!je.is_array())
        throw ValidationError("edges must be an array");
    auto edges = std::vector<Edge>();
    for (const auto& e: je)
    {
        if (!e.is_array() || e.size() != 2)
            throw ValidationError("edge must be a pair [i, j]");
        edges.push_back({ require_index(e[0]), require_index(e[1]) });
    }

    auto properties = std::optional<PropertyVector>();
    if (j.contains("properties") && !j.at("properties").is_null())
        properties = properties_from_json(j.at("properties"));

    auto name = std::string();
    if (j.contains("name") && !j.at("name").is_null())
    {
        if (!j.at("name").is_string())
            throw ValidationError("name must be a string");
        name = j.at("name").get<std::string>();
    }

    return Lattice(vectors, UnitCell(std::move(nodes), std::move(edges)), std::move(properties), std::move(name));
}

Lattice parse_lattice(std::string_view text)
{
    auto j = json();
    try
    {
        j = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw ParseError(std::string("malformed lattice JSON: ") + e.what());
    }
    return lattice_from_json(j);
}

json lattice_to_json(const Lattice& lattice)
{
    auto j = json::object();
    auto lv = json::array();
    for (int r = 0; r < 3; ++r)
        lv.push_back({ lattice.vectors()(r, 0), lattice.vectors()(r, 1), lattice.vectors()(r, 2) });
    j["lattice_vectors"] = std::move(lv);

    auto nodes = json::array();
    for (const auto& p: lattice.cell().nodes())
        nodes.push_back({ p.x(), p.y(), p.z() });
    j["nodes"] = std::move(nodes);

    auto edges = json::array();
    for (const auto& e: lattice.cell().edges())
        edges.push_back({ e.a, e.b });
    j["edges"] = std::move(edges);

    if (!lattice.name().empty())
        j["name"] = lattice.name();
    if (lattice.properties())
        j["properties"] = properties_to_json(*lattice.properties());
    return j;
}

std::string serialize_lattice(const Lattice& lattice)
{
    return lattice_to_json(lattice).dump(2) + "\n";
}

Lattice read_lattice_file(const std::filesystem::path& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ValidationError("cannot open lattice file " + path.string());
    auto buffer = std::stringstream();
    buffer << in.rdbuf();
    try
    {
        return parse_lattice(buffer.str());
    }
    catch (const ValidationError& e)
    {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_lattice_file(const std::filesystem::path& path, const Lattice& lattice)
{
    auto out = std::ofstream(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << serialize_lattice(lattice);
    if (!out)
        throw Error("write failed for " + path.string());
}

UnitCell parse_scaffold_text(std::string_view text)
{
    enum class Section
    {
        Preamble,
        Header,
        Coordinates,
        Edges,
        Done,
    };

    static const auto count_re = std::regex(R"(^node\s+number\s*:\s*(\d+)\s*$)", std::regex::icase);

    auto section = Section::Preamble;
    auto declared = -1;
    auto nodes = std::vector<Vec3>();
    auto edges = std::vector<Edge>();
    auto line_no = 0;

    auto stream = std::istringstream(std::string(text));
    auto raw = std::string();
    while (section != Section::Done && std::getline(stream, raw))
    {
        ++line_no;
        auto line = std::string_view(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty() || line.starts_with("```"))
            continue;

        const auto low = lower(line);
        auto match = std::smatch();
        const auto low_str = std::string(low);

        switch (section)
        {
            case Section::Preamble:
                if (std::regex_match(low_str, match, count_re))
                {
                    declared = std::stoi(match[1].str());
                    section = Section::Header;
                }
                break;

            case Section::Header:
                if (low.back() == ':' && low.find("coordinates") != std::string::npos)
                    section = Section::Coordinates;
                else
                    throw ParseError("line " + std::to_string(line_no) + ": expected coordinates header, got '"
                                     + std::string(line) + "'");
                break;

            case Section::Coordinates:
            {
                if (low == "edges:")
                {
                    section = Section::Edges;
                    break;
                }
                const auto fields = tuple_fields(line);
                auto p = Vec3();
                if (fields.size() != 3 || !parse_double(fields[0], p.x()) || !parse_double(fields[1], p.y())
                    || !parse_double(fields[2], p.z()))
                    throw ParseError("line " + std::to_string(line_no) + ": unparseable coordinate tuple '"
                                     + std::string(line) + "'");
                nodes.push_back(p);
                break;
            }

            case Section::Edges:
            {
                if (line.front() != '(')
                {
                    section = Section::Done;
                    break;
                }
                const auto fields = tuple_fields(line);
                auto e = Edge();
                if (fields.size() != 2 || !parse_int(fields[0], e.a) || !parse_int(fields[1], e.b))
                    throw ParseError("line " + std::to_string(line_no) + ": unparseable edge tuple '"
                                     + std::string(line) + "'");
                edges.push_back(e);
                break;
            }

            case Section::Done:
                break;
        }
    }

    if (declared < 0)
        throw ParseError("missing 'Node number: N' line");
    if (section == Section::Header || section == Section::Coordinates)
        throw ParseError("missing 'Edges:' section");
    if (static_cast<int>(nodes.size()) != declared)
        throw ParseError("node count mismatch: declared " + std::to_string(declared) + ", found "
                         + std::to_string(nodes.size()) + " coordinate lines");

    try
    {
        return UnitCell(std::move(nodes), std::move(edges));
    }
    catch (const ValidationError& e)
    {
        throw ParseError(std::string("invalid scaffold: ") + e.what());
    }
}

std::string format_scaffold_text(const UnitCell& cell)
{
    auto out = std::ostringstream();
    out << "Node number: " << cell.size() << "\n";
    out << "Node coordinates (fractional):\n";
    for (const auto& p: cell.nodes())
        out << "(" << shortest(p.x()) << ", " << shortest(p.y()) << ", " << shortest(p.z()) << ")\n";
    out << "Edges:\n";
    for (const auto& e: cell.edges())
        out << "(" << e.a << ", " << e.b << ")\n";
    return out.str();
}

} // namespace symlat
