// Frozen expected values used as test oracles. Each constant was fixed from the
// module contracts before the implementation existed; tests compare against these,
// never against values recomputed by the code under test.
#pragma once

namespace oracle {

// Standard-normal quantiles (Wichura AS241 reference values).
inline constexpr double kPhiInv075 = 0.6744897501960817;    // Phi^-1(0.75)
inline constexpr double kPhiInv0975 = 1.959963984540054;    // Phi^-1(0.975)
inline constexpr double kPhiInv09 = 1.2815515655446004;     // Phi^-1(0.9)
inline constexpr double kPhiInv1em9 = -5.997807015008182;   // Phi^-1(1e-9)

// Ordered-quantile transform of {3,1,2}: ranks {3,1,2} of n=3 -> Phi^-1({3/4,1/4,2/4}).
inline constexpr double kOrq312[3] = {0.6744897501960817, -0.6744897501960817, 0.0};

// Geographical indicator 0.5*(1/sp) + 0.5*(1-dist).
inline constexpr double kGeo_sp1_d0 = 1.0;
inline constexpr double kGeo_sp2_d05 = 0.5;
inline constexpr double kGeo_sp10_d1 = 0.05;

// Cultural indicator 0.5*ling + 0.5*relig.
inline constexpr double kCult_06_02 = 0.4;

// Influence index alpha*IG + beta*IC at IG=0.6, IC=0.4.
inline constexpr double kInfl_half_half = 0.5;
inline constexpr double kInfl_geo_only = 0.6;

// Exposure row for neighbors {(HL,0.5),(HL,0.3),(LL,0.2)} in level order LL,HL,LH,HH.
inline constexpr double kNtemRow[4] = {0.2, 0.8, 0.0, 0.0};

// Multivariate-normal mode heights (2*pi)^(-K/2) for identity covariance.
inline constexpr double kMvnModeK2 = 0.15915494309189535;   // 1/(2*pi)
inline constexpr double kMvnModeK4 = 0.025330295910584444;  // 1/(2*pi)^2

// categorize_treatment FOUR->THREE remap: LL,HL,LH,HH -> L,M,M,H (indices).
inline constexpr int kFourToThree[4] = {0, 1, 1, 2};

}  // namespace oracle
