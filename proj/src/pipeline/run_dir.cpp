#include "detox/pipeline/run_dir.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include "detox/error.hpp"

namespace detox::pipeline {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::string hex;
    hex.reserve(len * 2);
    static constexpr char kDigits[] = "0123456789abcdef";
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kDigits[md[i] >> 4]);
        hex.push_back(kDigits[md[i] & 0xF]);
    }
    return hex;
}

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
    fs::create_directories(run_dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw IoError("run directory " + run_dir.string() + " is locked by another process (remove " +
                      path_.string() + " if no stage is running)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd, pid.data(), pid.size());
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

RunDir::RunDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path RunDir::stage_dir(const std::string& stage) const {
    auto dir = root_ / stage;
    fs::create_directories(dir);
    return dir;
}

namespace {

nlohmann::ordered_json digests(const std::vector<fs::path>& files, const fs::path& root) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (const auto& f : files) {
        const auto rel = f.lexically_relative(root);
        const std::string key = (rel.empty() || rel.string().starts_with("..")) ? f.string() : rel.string();
        out[key] = fs::exists(f) ? sha256_file(f) : std::string("missing");
    }
    return out;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

}  // namespace

void RunDir::record(const StageRecord& rec, const nlohmann::ordered_json& resolved_config) const {
    write_json(root_ / "config.resolved.json", resolved_config);

    const auto manifest_path = root_ / "manifest.json";
    nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        try {
            manifest = nlohmann::ordered_json::parse(in);
        } catch (const nlohmann::json::parse_error&) {
            manifest = nlohmann::ordered_json::object();  // rebuilt below
        }
    }
    manifest["tool_version"] = kToolVersion;
    manifest["config"] = resolved_config;
    manifest["config_sha256"] = sha256_file(root_ / "config.resolved.json");
    nlohmann::ordered_json entry;
    entry["seed"] = rec.seed;
    entry["inputs"] = digests(rec.inputs, root_);
    entry["outputs"] = digests(rec.outputs, root_);
    entry["wall_time_s"] = rec.wall_time_s;
    manifest["stages"][rec.stage] = entry;
    write_json(manifest_path, manifest);
}

}  // namespace detox::pipeline
