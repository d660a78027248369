#pragma once

// Register-file bank model, operand reuse cache and conflict analysis.

#include <array>
#include <map>
#include <vector>

#include "sasskit/profile.hpp"
#include "sasskit/sass.hpp"

namespace sasskit {

struct BankModel {
  int banks = 2;
  int width_bits = 64;
  int ports = 2;
  int penalty = 1;

  static BankModel of(const GpuArchProfile& profile);
  int bank_of(int reg) const { return reg % banks; }
};

/// Bank of a numbered general register; NotBankable for RZ and for
/// uniform or predicate registers.
int register_bank(int reg, const GpuArchProfile& profile);
int register_bank(const OperandValue& reg, const GpuArchProfile& profile);

/// Per-slot 2-entry operand reuse buffers, least-recently-written replacement.
class ReuseCacheState {
 public:
  static constexpr int kSlots = 4;
  static constexpr int kEntries = 2;

  bool contains(int slot, int reg) const;
  void save(int slot, int reg);
  void invalidate(int reg);
  void clear();
  const std::array<int, kEntries>& entries(int slot) const { return slots_[slot]; }

 private:
  std::array<std::array<int, kEntries>, kSlots> slots_{{{-1, -1}, {-1, -1}, {-1, -1}, {-1, -1}}};
  std::array<int, kSlots> next_{};
};

struct SourceRead {
  int slot = 0;
  int reg = 0;
  int bank = 0;
  bool reuse_hit = false;
};

struct InstructionConflicts {
  std::size_t index = 0;
  std::optional<std::uint64_t> address;
  std::vector<SourceRead> reads;
  std::vector<int> port_demand;  // per bank, after reuse hits
  int reuse_hits = 0;
  int conflict_cycles = 0;
};

struct ConflictReport {
  std::vector<InstructionConflicts> instructions;
  int total_conflict_cycles = 0;
  int total_reuse_hits = 0;
  int conflicting_instructions = 0;
};

ConflictReport analyze_conflicts(const Program& program, const GpuArchProfile& profile,
                                 bool model_reuse = false);

/// Conflict cycles of a single instruction, ignoring the reuse cache.
int instruction_conflict_cycles(const Instruction& instr, const BankModel& model);

struct ReassignResult {
  std::map<int, int> renaming;  // only registers that move
  Program program;
  ConflictReport before;
  ConflictReport after;
};

struct ReassignOptions {
  int budget = 255;          // registers R0..R(budget-1) are usable
  int exhaustive_limit = 8;  // exact search up to this many register units
  int restarts = 8;
  unsigned seed = 0x5a55;
};

ReassignResult reassign_registers(const Program& program, const GpuArchProfile& profile,
                                  const ReassignOptions& options = {});

/// Applies a register renaming to every general register operand.
Program rename_registers(const Program& program, const std::map<int, int>& renaming);

}  // namespace sasskit
