#pragma once

#include "dodbench/bench_runner.hpp"
#include "dodbench/core_model.hpp"
#include "dodbench/csv.hpp"
#include "dodbench/datagen.hpp"
#include "dodbench/dblp_ingest.hpp"
#include "dodbench/error.hpp"
#include "dodbench/mock_backend.hpp"
#include "dodbench/oracle.hpp"
#include "dodbench/query_model.hpp"
#include "dodbench/report.hpp"
#include "dodbench/translate.hpp"
#include "dodbench/xml_text.hpp"
