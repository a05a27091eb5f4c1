"""Write the SUPPORT complete-case table used by configs/support.ini.

Needs the SurvSet package (pip install SurvSet), which ships the data.
Usage: python scripts/export_support.py support.csv
"""
import sys

from SurvSet.data import SurvLoader

COLUMNS = {
    "num_age": "age",
    "fac_sex": "female",
    "fac_race": "race",
    "num_num_co": "num_comorbidities",
    "fac_diabetes": "diabetes",
    "fac_dementia": "dementia",
    "fac_ca": "cancer",
    "num_meanbp": "mean_blood_pressure",
    "num_hrt": "heart_rate",
    "num_resp": "respiration_rate",
    "num_temp": "temperature",
    "num_wblc": "white_blood_count",
    "num_sod": "serum_sodium",
    "num_crea": "serum_creatinine",
}


def main(path):
    df = SurvLoader().load_dataset(ds_name="support2")["df"]
    df = df[["pid", "time", "event", *COLUMNS]].dropna()
    df = df.rename(columns={"pid": "id", **COLUMNS})
    df["female"] = (df["female"] == "female").astype(int)
    for col in ("diabetes", "dementia", "num_comorbidities", "event"):
        df[col] = df[col].astype(int)
    df.to_csv(path, index=False)
    print(f"wrote {len(df)} rows to {path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "support.csv")
