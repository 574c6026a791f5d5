// All-or-nothing output writing: files are written to temporaries and renamed
// into place only once every one of them has been written.

#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace unmix {

class StagedOutputs {
 public:
  void add(std::filesystem::path path, std::vector<unsigned char> bytes) {
    files_.push_back({std::move(path), std::move(bytes)});
  }

  void add(std::filesystem::path path, const std::string& text) {
    add(std::move(path), std::vector<unsigned char>(text.begin(), text.end()));
  }

  void commit() {
    std::vector<std::filesystem::path> temps;
    try {
      for (const auto& f : files_) {
        auto tmp = f.path;
        tmp += ".partial";
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(f.bytes.data()),
                  std::streamsize(f.bytes.size()));
        out.close();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
      }
      for (size_t i = 0; i < files_.size(); ++i)
        std::filesystem::rename(temps[i], files_[i].path);
    } catch (...) {
      std::error_code ec;
      for (const auto& t : temps) std::filesystem::remove(t, ec);
      throw;
    }
    files_.clear();
  }

 private:
  struct File {
    std::filesystem::path path;
    std::vector<unsigned char> bytes;
  };
  std::vector<File> files_;
};

inline void write_file_atomic(const std::filesystem::path& path,
                              std::vector<unsigned char> bytes) {
  StagedOutputs out;
  out.add(path, std::move(bytes));
  out.commit();
}

}  // namespace unmix
