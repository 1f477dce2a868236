#include "sargen/store.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sargen/errors.hpp"

namespace fs = std::filesystem;

namespace sargen {

namespace {

constexpr const char* kVersion = "tilestore v1";

// geo_id is an opaque string; escape it so the manifest stays line/token
// oriented whatever the caller puts in it.
std::string escape_token(const std::string& s) {
    if (s.empty()) return "%00";
    std::string out;
    out.reserve(s.size());
    char buf[4];
    for (const char ch : s) {
        const auto u = static_cast<unsigned char>(ch);
        if (u <= 0x20 || u == 0x7F || ch == '%') {
            std::snprintf(buf, sizeof(buf), "%%%02X", u);
            out += buf;
        } else {
            out += ch;
        }
    }
    return out;
}

std::string unescape_token(const std::string& s) {
    if (s == "%00") return "";
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

void write_blob(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_dataset: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("save_dataset: write failed for " + path.string());
}

std::vector<std::uint8_t> read_blob(const fs::path& path, std::size_t expect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_dataset: missing blob " + path.string());
    std::vector<std::uint8_t> bytes(expect);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(expect));
    if (!in || in.gcount() != static_cast<std::streamsize>(expect))
        throw IoError("load_dataset: short read in " + path.string());
    char extra;
    if (in.read(&extra, 1)) throw IoError("load_dataset: trailing bytes in " + path.string());
    return bytes;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& dir) {
    if (dataset.tiles.size() != dataset.manifest.entries.size())
        throw InputError("save_dataset: manifest does not match tile list");
    const fs::path root(dir);
    fs::create_directories(root / "tiles");

    std::ostringstream m;
    const auto counts = dataset.manifest.split_counts();
    m << kVersion << "\n";
    m << "tile_size " << dataset.manifest.tile_size << "\n";
    m << "count train " << counts[0] << " val " << counts[1] << " test " << counts[2] << "\n";
    for (std::size_t i = 0; i < dataset.tiles.size(); ++i) {
        const auto& e = dataset.manifest.entries[i];
        const auto& t = dataset.tiles[i];
        if (e.has_flood != t.has_flood() || e.checksum != t.checksum())
            throw InputError("save_dataset: manifest entry " + e.id + " inconsistent with tile");
        m << "tile " << e.id << " " << escape_token(e.origin.geo_id) << " " << e.origin.row << " "
          << e.origin.col << " " << to_string(e.split) << " " << (e.has_flood ? 1 : 0) << " "
          << std::hex << e.checksum << std::dec << "\n";
        write_blob(root / "tiles" / (e.id + ".bin"), t.px);
        if (t.has_mask()) write_blob(root / "tiles" / (e.id + ".mask"), t.mask);
    }
    std::ofstream out(root / "manifest.txt");
    if (!out) throw IoError("save_dataset: cannot open manifest in " + dir);
    out << m.str();
    if (!out) throw IoError("save_dataset: manifest write failed in " + dir);
}

Dataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream in(root / "manifest.txt");
    if (!in) throw IoError("load_dataset: no manifest.txt in " + dir);

    std::string line;
    if (!std::getline(in, line) || line != kVersion)
        throw IoError("load_dataset: version mismatch in " + dir + " (got '" + line + "')");

    Dataset ds;
    std::string key;
    {
        std::getline(in, line);
        std::istringstream ls(line);
        ls >> key >> ds.manifest.tile_size;
        if (key != "tile_size" || ds.manifest.tile_size <= 0)
            throw IoError("load_dataset: bad tile_size line in " + dir);
    }
    std::getline(in, line);  // count line is advisory; tallies are re-derived

    const std::size_t npx =
        static_cast<std::size_t>(ds.manifest.tile_size) * ds.manifest.tile_size;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        std::string geo_s, split_s, flood_s, sum_s;
        ls >> key >> e.id >> geo_s >> e.origin.row >> e.origin.col >> split_s >> flood_s >>
            sum_s;
        if (!ls || key != "tile")
            throw IoError("load_dataset: malformed manifest line: '" + line + "'");
        e.origin.geo_id = unescape_token(geo_s);
        e.split = split_from_string(split_s);
        e.has_flood = flood_s == "1";
        e.checksum = std::stoull(sum_s, nullptr, 16);

        Tile t;
        t.size = ds.manifest.tile_size;
        t.origin = e.origin;
        t.split = e.split;
        t.px = read_blob(root / "tiles" / (e.id + ".bin"), npx);
        const fs::path mask_path = root / "tiles" / (e.id + ".mask");
        if (fs::exists(mask_path)) {
            t.mask = read_blob(mask_path, npx);
            for (const auto m : t.mask)
                if (m > 1) throw IoError("load_dataset: non-binary mask for record " + e.id);
        }
        if (t.checksum() != e.checksum)
            throw IoError("load_dataset: checksum mismatch for record " + e.id);
        if (t.has_flood() != e.has_flood)
            throw IoError("load_dataset: flood flag mismatch for record " + e.id);
        ds.manifest.entries.push_back(std::move(e));
        ds.tiles.push_back(std::move(t));
    }
    return ds;
}

}  // namespace sargen
